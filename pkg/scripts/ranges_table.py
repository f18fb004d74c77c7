#!/usr/bin/env python3
"""Print maximum QKD and distillation ranges, end-to-end fidelity and crossovers."""
import numpy as np

from repchain import analytic as an
from repchain import envelope as ev
from repchain.params import FIG4, SEC2C, ChainConfig, db_to_linear

N_LIST = (1, 2, 4, 8, 16)


def main() -> None:
    print(f"{'N':>3} {'L_qkd':>9} {'L_approx':>9} {'L_dist':>9} {'L_dist(exact)':>13} {'F(L_qkd)':>9}")
    for n in N_LIST:
        lq = an.max_range_qkd(SEC2C, n)
        print(f"{n:>3} {lq:9.2f} {an.approx_max_range(SEC2C, n):9.2f} "
              f"{an.max_range_distillation(SEC2C, n):9.2f} "
              f"{an.max_range_distillation(SEC2C, n, mixing='exact'):13.2f} "
              f"{an.fidelity(SEC2C, ChainConfig(lq, n)):9.4f}")
    lengths = np.arange(0.0, 1000.5, 0.5)
    env = ev.numeric_envelope(FIG4, lengths, tuple(range(1, 129)))
    etas = [db_to_linear(FIG4.alpha_db_per_km * L) for L in lengths]
    for label, fn in (("TGW bound", ev.tgw_rate), ("ideal BB84", ev.bb84_ideal_rate)):
        base = [fn(e, FIG4.m_modes, FIG4.t_q_seconds) for e in etas]
        print(f"envelope beats {label} beyond {ev.envelope_crossover(lengths, env.rates, base):.1f} km")
    print(f"xi = {ev.exponent_xi(FIG4).xi:.5f}, t = {ev.exponent_t(FIG4):.5f}, "
          f"M_min = {ev.minimum_modes(FIG4)}")


if __name__ == "__main__":
    main()
