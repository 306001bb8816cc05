"""Run every CLI experiment behind the acceptance criteria and write JSON reports.

usage: python3 scripts/run_acceptance_suite.py [outdir] [--quick]

--quick shrinks replicate counts by 10x for a smoke run; the full budget
matches the acceptance tests.
"""
import json
import pathlib
import sys

from tfrac.cli import ExperimentConfig, run

RUNS = [
    ("oracle_I_0.3_1", "oracle-check", ("I", 0.3, 1.0), {}),
    ("oracle_II_1.2_0.1", "oracle-check", ("II", 1.2, 0.1), {}),
    ("bm_clt", "bm-clt", ("I", 0.5, 1.0), {}),
    ("cumulant_rates", "cumulant-rates", ("I", 0.5, 1.0), {}),
    ("pvar_half", "pvar", ("I", 0.5, 1.0), {}),
    ("pvar_0.7", "pvar", ("I", 0.7, 1.0), {}),
    ("spectral", "spectral", ("I", 0.5, 1.0), {}),
    ("edgeworth", "edgeworth", ("I", 0.5, 1.0), {}),
]


def main(argv):
    quick = "--quick" in argv
    args = [a for a in argv if not a.startswith("--")]
    out = pathlib.Path(args[0] if args else "reports")
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for name, exp, (kind, h, lam), extra in RUNS:
        cfg = ExperimentConfig.from_dict({"experiment": exp, "params": {"kind": kind, "hurst": h, "lambda": lam}, **extra})
        if quick and cfg.replicates:
            cfg.replicates = max(200, cfg.replicates // 10)
        cfg.output_path = str(out / f"{name}.json")
        rep = run(cfg)
        summary[name] = {"passed": rep.passed, "wall_clock_s": round(rep.wall_clock_s, 2)}
        print(f"{'PASS' if rep.passed else 'FAIL'} {name:20s} {rep.wall_clock_s:8.1f}s", flush=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0 if all(v["passed"] for v in summary.values()) else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
