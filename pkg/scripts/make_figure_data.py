#!/usr/bin/env python3
"""Write every figure/table data set as CSV/JSON into one directory.

    python scripts/make_figure_data.py --out results/

Set REPCHAIN_WORKERS to spread the per-N curves over several processes.
"""
import argparse
from pathlib import Path

from repchain.cli import main

JOBS = {
    "rate_curves_fig4.csv": ["rate-curve", "--n-links", "1,2,4,8,16", "--l-max", "4000"],
    "envelope_fig4.csv": ["envelope", "--l-max", "2000", "--p-dark", "1e-8,1e-7,1e-6,1e-5,1e-4"],
    "xi_fig4.json": ["xi"],
    "xi_vs_m.csv": ["xi-vs-m"],
    "fidelity_sec2c.csv": ["fidelity", "--preset", "sec2c", "--l-max", "4000"],
    "distill_sec2c.csv": ["distill", "--preset", "sec2c", "--l-max", "4500"],
    "rate_curves_fig8.csv": ["rate-curve", "--preset", "fig8", "--n-links", "1,2,4,8", "--l-max", "2000"],
    "nmax_fig8.csv": ["nmax", "--preset", "fig8"],
}


def run(out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, argv in JOBS.items():
        code = main(argv + ["--out", str(out_dir / name)])
        print(f"{name}: exit {code}")
        if code:
            return code
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    raise SystemExit(run(ap.parse_args().out))
