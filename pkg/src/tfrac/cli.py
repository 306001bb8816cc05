"""``tfrac`` command line: covariance tables, path sampling and Monte-Carlo checks.

Every experiment produces an ExperimentReport of pass/fail records. The exit
status is 0 when all records pass, 1 when any fails and 2 on invalid input.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .covmodel import (
    CovarianceModel,
    Kind,
    ProcessParams,
    bm_limit_variance,
    cov,
    fbm_variance_constant,
    spectral_density,
)
from .oracle import cov_quadrature, noise_autocov_quadrature
from .sampler import RNG_ID, SamplePath, map_replicates, plan_noise, resolve_threads, sample_path
from .specfun import abs_gaussian_moment
from .stats import (
    HermiteSpec,
    derive_seed,
    edgeworth_check,
    exact_variance,
    ks_critical_value,
    ks_distance,
    p_variation,
    quadratic_variation_cumulants,
    rate_regression,
    sample_cumulants,
    variation_replicates,
)

SCHEMA = 1
DEFAULT_SEED = 0xC0FFEE


class Experiment(str, enum.Enum):
    COV_TABLE = "cov-table"
    SAMPLE = "sample"
    BM_CLT = "bm-clt"
    CUMULANT_RATES = "cumulant-rates"
    PVAR = "pvar"
    SPECTRAL = "spectral"
    EDGEWORTH = "edgeworth"
    ORACLE_CHECK = "oracle-check"


# default n grids; the smaller entries matter only for rate experiments
_DEFAULT_N = {
    Experiment.COV_TABLE: (),
    Experiment.SAMPLE: (1024,),
    Experiment.BM_CLT: (1 << 14,),
    Experiment.CUMULANT_RATES: tuple(1 << e for e in range(8, 15)),
    Experiment.PVAR: (1 << 12, 1 << 14),
    Experiment.SPECTRAL: (),
    Experiment.EDGEWORTH: (1 << 12,),
    Experiment.ORACLE_CHECK: (),
}
_DEFAULT_REPLICATES = {
    Experiment.BM_CLT: 2000,
    Experiment.CUMULANT_RATES: 5000,
    Experiment.PVAR: 500,
    Experiment.EDGEWORTH: 200_000,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: Experiment
    params: ProcessParams
    n_grid: tuple = ()
    replicates: int = 0
    seed: int = DEFAULT_SEED
    output_path: str | None = None
    format: str = "json"
    threads: Any = "auto"
    hermite_q: int = 2
    delta: float | None = None
    t_grid: tuple = (0.25, 0.5, 1.0, 2.0, 5.0)
    z_grid: tuple = (-2.0, 0.0, 2.0)
    max_lag: int = 30

    def __post_init__(self):
        try:
            self.experiment = Experiment(self.experiment)
        except ValueError as exc:
            raise ConfigError(f"unknown experiment {self.experiment!r}") from exc
        if isinstance(self.params, dict):
            self.params = params_from_dict(self.params)
        self.n_grid = tuple(int(n) for n in (self.n_grid or _DEFAULT_N[self.experiment]))
        if any(n < 1 for n in self.n_grid):
            raise ConfigError(f"n must be >= 1, got {list(self.n_grid)}")
        self.replicates = int(self.replicates or _DEFAULT_REPLICATES.get(self.experiment, 0))
        if self.experiment in _DEFAULT_REPLICATES and self.replicates < 2:
            raise ConfigError("replicates must be >= 2")
        self.seed = int(self.seed)
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {self.format!r}")
        if self.threads != "auto":
            self.threads = int(self.threads)
            if self.threads < 1:
                raise ConfigError("threads must be >= 1 or 'auto'")
        if self.hermite_q < 1:
            raise ConfigError("hermite_q must be >= 1")
        if self.delta is not None and not float(self.delta) > 0.0:
            raise ConfigError("delta must be > 0")
        self.t_grid = tuple(float(t) for t in self.t_grid)
        self.z_grid = tuple(float(z) for z in self.z_grid)
        if any(t < 0.0 for t in self.t_grid):
            raise ConfigError("t_grid entries must be >= 0")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["experiment"] = self.experiment.value
        d["params"] = self.params.to_dict()
        d["n_grid"] = list(self.n_grid)
        d["t_grid"] = list(self.t_grid)
        d["z_grid"] = list(self.z_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def params_from_dict(d: dict) -> ProcessParams:
    unknown = set(d) - {"kind", "hurst", "lambda"}
    if unknown:
        raise ConfigError(f"unknown params keys: {sorted(unknown)}")
    try:
        return ProcessParams(d["kind"], d["hurst"], d["lambda"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid process parameters: {exc}") from exc


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list = field(default_factory=list)
    wall_clock_s: float = 0.0
    extra: dict = field(default_factory=dict)
    path: SamplePath | None = field(default=None, repr=False)

    def add(self, name, inputs, estimate, target, tolerance, passed, provenance, stderr=None):
        if provenance not in ("closed-form", "asymptote", "oracle", "MC-derived"):
            raise ValueError(f"bad provenance {provenance!r}")
        self.records.append(
            {
                "name": name,
                "inputs": inputs,
                "estimate": _num(estimate),
                "target": _num(target),
                "tolerance": _num(tolerance),
                "stderr": _num(stderr),
                "pass": bool(passed),
                "provenance": provenance,
            }
        )

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.records)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "library_version": __version__,
            "rng": RNG_ID,
            "config": self.config.to_dict(),
            "records": self.records,
            "extra": self.extra,
            "passed": self.passed,
            "wall_clock_s": self.wall_clock_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "inputs", "estimate", "target", "tolerance", "stderr", "pass", "provenance"])
        for r in self.records:
            w.writerow([r["name"], json.dumps(r["inputs"], sort_keys=True)] + [_fmt(r[k]) for k in ("estimate", "target", "tolerance", "stderr")] + [r["pass"], r["provenance"]])
        return buf.getvalue()


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(x, ".17g") if isinstance(x, float) else str(x)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _cov_table(cfg, model, rep):
    p = cfg.params
    grid = cfg.t_grid
    for i, s in enumerate(grid):
        for t in grid[i:]:
            c = cov(p, s, t)
            q, err = cov_quadrature(p, s, t)
            tol = 1e-6 * max(1.0, abs(q))
            rep.add("cov", {"s": s, "t": t}, c, q, tol, abs(c - q) <= tol, "oracle", err)


def _oracle_check(cfg, model, rep):
    _cov_table(cfg, model, rep)
    for k in range(cfg.max_lag + 1):
        g = model.autocov(k)
        q, err = noise_autocov_quadrature(cfg.params, k)
        rep.add("noise_autocov", {"k": k}, g, q, 1e-7, abs(g - q) <= 1e-7, "oracle", err)


def _sample(cfg, model, rep):
    n = cfg.n_grid[0]
    delta = cfg.delta if cfg.delta is not None else 1.0
    path = sample_path(model, n, delta, cfg.seed)
    rep.add("path_origin", {"n": n, "delta": delta}, path.values[0], 0.0, 0.0, path.values[0] == 0.0, "closed-form")
    finite = bool(np.all(np.isfinite(path.values)))
    rep.add("path_finite", {"n": n}, float(finite), 1.0, 0.0, finite, "closed-form")
    rep.extra["method"] = path.method.value
    rep.path = path
    if cfg.format == "json":
        rep.extra["values"] = [float(v) for v in path.values]


def _bm_clt(cfg, model, rep):
    f = HermiteSpec.single(cfg.hermite_q)
    n = cfg.n_grid[-1]
    m = cfg.replicates
    v = variation_replicates(model, f, n, cfg.seed, m, cfg.threads)
    fn = v / math.sqrt(exact_variance(model, f, n))
    ks = ks_distance(fn)
    crit = ks_critical_value(m, 1e-3)
    rep.add("ks_vs_normal", {"n": n, "replicates": m, "level": 1e-3}, ks, 0.0, crit, ks <= crit, "MC-derived")
    target = bm_limit_variance(model, f)
    var = float(np.var(v, ddof=1))
    ok = target > 0 and abs(var / target - 1.0) <= 0.05
    rep.add("var_vn", {"n": n, "replicates": m}, var, target, 0.05 * target, ok, "closed-form")


def _cumulant_rates(cfg, model, rep):
    f = HermiteSpec.single(cfg.hermite_q)
    k3_pts, k4_pts, zeros3, zeros4 = [], [], 0, 0
    for idx, n in enumerate(cfg.n_grid):
        v = variation_replicates(model, f, n, derive_seed(cfg.seed, idx), cfg.replicates, cfg.threads)
        est = sample_cumulants(v / math.sqrt(exact_variance(model, f, n)), n)
        rec = est.to_dict()
        if cfg.hermite_q == 2:
            rec["exact_k3"], rec["exact_k4"] = quadratic_variation_cumulants(model, n)
        rep.extra.setdefault("cumulants", []).append(rec)
        if est.k3 != 0.0:
            k3_pts.append((n, abs(est.k3)))
        else:
            zeros3 += 1
        if est.k4 != 0.0:
            k4_pts.append((n, abs(est.k4)))
        else:
            zeros4 += 1
    for name, pts, zeros, target, tol in (("k3_slope", k3_pts, zeros3, -0.5, 0.15), ("k4_slope", k4_pts, zeros4, -1.0, 0.3)):
        try:
            fit = rate_regression(pts, zeros)
            rep.add(name, {"n_grid": list(cfg.n_grid), "replicates": cfg.replicates, "excluded": zeros}, fit.slope, target, tol, abs(fit.slope - target) <= tol, "asymptote", fit.stderr)
        except ValueError:
            rep.add(name, {"n_grid": list(cfg.n_grid), "excluded": zeros}, math.nan, target, tol, False, "asymptote")


def _pvar(cfg, model, rep):
    p = cfg.params
    p.require_unit_hurst()
    h = p.hurst
    beta = 1.0 / h
    n_fine = cfg.n_grid[-1]
    n_coarse = cfg.n_grid[0]
    if n_fine % n_coarse:
        raise ConfigError("pvar needs the coarse n to divide the fine n")
    stride = n_fine // n_coarse
    delta = 1.0 / n_fine
    unit = CovarianceModel.shared(p.rescaled(delta))
    plan = plan_noise(unit, n_fine)
    scale = delta**h

    def one(r):
        x = np.concatenate(([0.0], np.cumsum(plan.draw(cfg.seed, r)))) * scale
        return p_variation(x, beta), p_variation(x, beta, stride)

    res = np.array(map_replicates(one, cfg.replicates, cfg.threads))
    fine, coarse = res[:, 0], res[:, 1]
    mean = float(np.mean(fine))
    se = float(np.std(fine, ddof=1) / math.sqrt(len(fine)))
    # two readings of the limiting constant; they agree at H = 1/2
    c_small = math.sqrt(fbm_variance_constant(h))
    ez = abs_gaussian_moment(beta)
    cands = {"C^(+1/H)": c_small**beta * ez, "C^(-1/H)": c_small ** (-beta) * ez}
    rep.extra["c_H_candidates"] = cands
    if h == 0.5:
        rep.add("mean_S", {"n": n_fine, "beta": beta, "replicates": cfg.replicates}, mean, cands["C^(+1/H)"], 0.03, abs(mean - 1.0) <= 0.03, "closed-form", se)
    else:
        rep.extra["mean_S"] = {"estimate": mean, "stderr": se}
    med = float(np.median(np.abs(fine / coarse - 1.0)))
    rep.add("stabilization", {"n_fine": n_fine, "n_coarse": n_coarse, "beta": beta}, med, 0.0, 0.05, med <= 0.05, "MC-derived")


def _spectral(cfg, model, rep):
    h0 = spectral_density(model, 0.0)
    if cfg.params.kind is Kind.I:
        rep.add("h_at_zero", {"omega": 0.0}, h0, 0.0, 1e-10, h0 <= 1e-10, "closed-form")
    lam = cfg.params.lam
    for w in np.linspace(0.01, 0.1, 10):
        w = float(w)
        ratio = spectral_density(model, w) / (w * w / (lam * lam + w * w))
        rep.add("h_ratio", {"omega": w}, ratio, 1.0, None, 0.1 <= ratio <= 10.0, "asymptote")
    rep.extra["clamp_count"] = model.clamp_count


def _edgeworth(cfg, model, rep):
    er = edgeworth_check(model, cfg.hermite_q, cfg.z_grid, cfg.n_grid, cfg.replicates, cfg.seed, cfg.threads)
    rep.extra["rho"] = er.rho
    for r in er.records:
        if r["decisive"]:
            rep.add("edgeworth", {"n": r["n"], "z": r["z"], "replicates": cfg.replicates}, r["estimate"], r["target"], r["tolerance"], r["pass"], "closed-form", r["stderr"])
        else:
            rep.extra.setdefault("trend", []).append(r)


_RUNNERS = {
    Experiment.COV_TABLE: _cov_table,
    Experiment.ORACLE_CHECK: _oracle_check,
    Experiment.SAMPLE: _sample,
    Experiment.BM_CLT: _bm_clt,
    Experiment.CUMULANT_RATES: _cumulant_rates,
    Experiment.PVAR: _pvar,
    Experiment.SPECTRAL: _spectral,
    Experiment.EDGEWORTH: _edgeworth,
}


def run(config: ExperimentConfig) -> ExperimentReport:
    """Execute one experiment and write its report (or path CSV) to output_path."""
    t0 = time.perf_counter()
    model = CovarianceModel(config.params)
    rep = ExperimentReport(config)
    _RUNNERS[config.experiment](config, model, rep)
    rep.wall_clock_s = time.perf_counter() - t0
    if config.output_path:
        if config.experiment is Experiment.SAMPLE and config.format == "csv":
            emit_path_csv(rep.path, config.output_path)
        else:
            with open(config.output_path, "w", newline="\n") as fh:
                fh.write(rep.to_json() if config.format == "json" else rep.to_csv())
    return rep


def emit_path_csv(path: SamplePath, output) -> None:
    """Write `index,t,value` rows with 17 significant digits and LF endings."""
    own = isinstance(output, (str, bytes)) or hasattr(output, "__fspath__")
    fh = open(output, "w", newline="") if own else output
    try:
        fh.write("index,t,value\n")
        for i, (t, v) in enumerate(zip(path.grid, path.values)):
            fh.write(f"{i},{float(t):.17g},{float(v):.17g}\n")
    finally:
        if own:
            fh.close()


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tfrac", description="Tempered fractional Brownian motion toolkit")
    ap.add_argument("experiment", choices=[e.value for e in Experiment])
    ap.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    ap.add_argument("--kind", choices=["I", "II"])
    ap.add_argument("--hurst", type=float)
    ap.add_argument("--lambda", dest="lam", type=float)
    ap.add_argument("--n", type=int, nargs="+")
    ap.add_argument("--replicates", type=int)
    ap.add_argument("--seed", type=lambda s: int(s, 0))
    ap.add_argument("--out")
    ap.add_argument("--format", choices=["json", "csv"])
    ap.add_argument("--threads")
    ap.add_argument("--q", dest="hermite_q", type=int)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--t", dest="t_grid", type=float, nargs="+")
    ap.add_argument("--z", dest="z_grid", type=float, nargs="+")
    ap.add_argument("--max-lag", dest="max_lag", type=int)
    return ap


def config_from_args(argv) -> ExperimentConfig:
    a = _build_parser().parse_args(argv)
    d: dict = {}
    if a.config:
        with open(a.config) as fh:
            d = json.load(fh)
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        if "experiment" in d and d["experiment"] != a.experiment:
            raise ConfigError("experiment in config file disagrees with the command")
    d["experiment"] = a.experiment
    params = dict(d.get("params", {}))
    for key, val in (("kind", a.kind), ("hurst", a.hurst), ("lambda", a.lam)):
        if val is not None:
            params[key] = val
    params.setdefault("kind", "I")
    params.setdefault("hurst", 0.5)
    params.setdefault("lambda", 1.0)
    d["params"] = params
    flags = {
        "n_grid": a.n,
        "replicates": a.replicates,
        "seed": a.seed,
        "output_path": a.out,
        "format": a.format,
        "hermite_q": a.hermite_q,
        "delta": a.delta,
        "t_grid": a.t_grid,
        "z_grid": a.z_grid,
        "max_lag": a.max_lag,
    }
    d.update({k: v for k, v in flags.items() if v is not None})
    # flag beats env beats config file
    d["threads"] = resolve_threads(a.threads if a.threads is not None else d.get("threads"))
    return ExperimentConfig.from_dict(d)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"tfrac: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    try:
        rep = run(cfg)
    except ConfigError as exc:
        print(f"tfrac: error: {exc}", file=sys.stderr)
        return 2
    if not cfg.output_path:
        if rep.path is not None and cfg.format == "csv":
            emit_path_csv(rep.path, sys.stdout)
        else:
            sys.stdout.write(rep.to_json() if cfg.format == "json" else rep.to_csv())
    for r in rep.records:
        status = "PASS" if r["pass"] else "FAIL"
        print(f"{status} {r['name']} {json.dumps(r['inputs'], sort_keys=True)} estimate={r['estimate']} target={r['target']}", file=sys.stderr)
    return 0 if rep.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
