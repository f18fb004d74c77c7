#!/usr/bin/env python3
"""Two-pair emission study on the fig8 preset: QBER ratio scan, elementary fit, thresholds."""
import argparse

from repchain import phenomenology as ph
from repchain.params import FIG8


def main(rule: str) -> None:
    scan = ph.qber_ratio_scan(FIG8, double_click=rule)
    print(f"C(p2) fit on p2 <= {scan.fit_max_p2}: slope {scan.slope:.3f}, intercept {scan.intercept:.8f}")
    print(f"{'p2':>7} {'C':>9} {'spread':>9}  Q_1..Q_4")
    for p2, c, spread, qs in zip(scan.p2_grid, scan.c_values, scan.level_spread, scan.level_qbers):
        print(f"{p2:7.3f} {c:9.6f} {spread:9.2e}  " + " ".join(f"{q:.5f}" for q in qs))
    fit = ph.elementary_qber_model(FIG8, double_click=rule)
    print(f"elementary 1-2Q_1 slope {fit.slope:.4f}; bound holds everywhere: {bool(fit.bound_holds.all())}")
    for n in (2, 4, 8):
        th = ph.p2_threshold(FIG8, n, "10km", rule)
        print(f"N={n}: threshold p2 = {th:.5f}, estimate N_max = {ph.n_max_estimate(th)}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--double-click", choices=("discard", "random"), default=ph.DEFAULT_RULE)
    main(ap.parse_args().double_click)
