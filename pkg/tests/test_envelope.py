import math

import numpy as np
import pytest

from repchain import analytic as an
from repchain import envelope as ev
from repchain.params import FIG4, ChainConfig, db_to_linear


def test_three_piece_segments():
    for n in (1, 2, 4, 8):
        bound = ev.three_piece_bound(FIG4, n)
        assert bound(0.0) == pytest.approx(ev.prefactor_a(FIG4) * ((0.9 * FIG4.lambda_m) ** 2 / 2) ** n, rel=1e-14)
        assert bound(bound.l_max) == 0.0 and bound(bound.l_max + 50) == 0.0
        # plateau and linear segment meet at L'
        eta = db_to_linear(FIG4.alpha_db_per_km * bound.l_prime)
        assert eta * bound.slope_coefficient == pytest.approx(bound.r_max, rel=1e-9)


def test_corner_locus_on_t_power_law():
    t = ev.exponent_t(FIG4)
    a = ev.prefactor_a(FIG4)
    for n in range(1, 20):
        bound = ev.three_piece_bound(FIG4, n)
        assert bound.r_max == pytest.approx(a * bound.eta_prime ** t, rel=1e-9)


def test_bound_dominates_zero_dark_rate(rng):
    quiet = FIG4.with_dark_counts(0.0)
    for _ in range(500):
        n = int(rng.integers(1, 33))
        length = rng.uniform(0, 3000)
        assert an.secret_key_rate(quiet, ChainConfig(length, n)) <= ev.three_piece_rate(quiet, n, length) * (1 + 1e-12)


def test_exponent_t():
    assert ev.exponent_t(FIG4) == pytest.approx(0.227, abs=1e-3)
    # symmetric case: eta_r^2 lambda^2 / 2 = 2 / (M eta_e^2)
    sym = FIG4.replace(eta_r=1.0, lambda_m=1.0, eta_e=1.0, m_modes=4)
    assert ev.exponent_t(sym) == pytest.approx(1.0, rel=1e-14)
    assert ev.exponent_t(FIG4) < ev.exponent_xi(FIG4).xi
    with pytest.raises(ev.EnvelopeError):
        ev.exponent_t(FIG4.replace(m_modes=2))


def test_exponent_xi():
    sol = ev.exponent_xi(FIG4)
    assert sol.xi == pytest.approx(0.284, abs=1e-3)
    assert abs(sol.residual) < 1e-10
    assert 0 < sol.z < 1


def test_xi_uniform_scan_has_one_sign_change():
    _, _, residual = ev._xi_terms(FIG4)
    grid = np.linspace(0, 1, ev.XI_SCAN_POINTS + 1)[1:-1]
    signs = np.sign(residual(grid))
    assert np.count_nonzero(signs[:-1] * signs[1:] < 0) == 1


def test_xi_independent_of_detector_and_clock():
    base = ev.exponent_xi(FIG4).xi
    assert ev.exponent_xi(FIG4.replace(eta_d=0.5, t_q_seconds=1e-6)).xi == base


def test_xi_failure_reports_profile():
    with pytest.raises(ev.EnvelopeError, match="sign profile"):
        ev.exponent_xi(FIG4.replace(m_modes=1))


def test_xi_vs_m_trend():
    ms = [10, 30, 100, 300, 1000, 3000, 10000, 10 ** 5]
    xis = ev.xi_vs_m(FIG4, ms)
    assert all(b < a for a, b in zip(xis, xis[1:]))
    assert math.isnan(ev.xi_vs_m(FIG4, [1])[0])
    m_min = ev.minimum_modes(FIG4)
    assert ev.exponent_xi(FIG4.replace(m_modes=m_min)).xi < 1
    assert ev.xi_vs_m(FIG4, [m_min - 1])[0] >= 1 or math.isnan(ev.xi_vs_m(FIG4, [m_min - 1])[0])


def test_swapped_efficiencies_converge():
    ms = [1000, 10 ** 4, 10 ** 5, 10 ** 6]
    a = ev.xi_vs_m(FIG4.replace(eta_e=0.5, eta_r=0.9), ms)
    b = ev.xi_vs_m(FIG4.replace(eta_e=0.9, eta_r=0.5), ms)
    gaps = [abs(x - y) for x, y in zip(a, b)]
    assert all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))


def test_zero_dark_envelope_touches_power_law():
    quiet = FIG4.with_dark_counts(0.0)
    lengths = np.arange(100, 3001, 1.0)
    res = ev.numeric_envelope(quiet, lengths, range(1, 200))
    law = ev.prefactor_a(quiet) * np.array([db_to_linear(0.15 * L) for L in lengths]) ** ev.exponent_xi(quiet).xi
    ratio = res.rates / law
    assert ratio.max() <= 1 + 1e-9
    peaks = [ratio[i] for i in range(1, len(ratio) - 1) if ratio[i] >= ratio[i - 1] and ratio[i] >= ratio[i + 1]]
    assert len(peaks) > 5 and min(peaks) > 0.98


def test_tgw_rate():
    assert ev.tgw_rate(0.0, 1000, 50e-9) == 0.0
    assert ev.tgw_rate(1.0, 1000, 50e-9) == math.inf
    eta = 1e-6
    assert ev.tgw_rate(eta, 1000, 50e-9) == pytest.approx(2 / math.log(2) * eta * 1000 / 50e-9, rel=1e-9)
    assert ev.bb84_ideal_rate(0.01, 10, 1.0) == pytest.approx(0.1)


def test_numeric_envelope_properties():
    lengths = np.arange(0, 1501, 25.0)
    cands = [1, 2, 4, 8, 16]
    grid = ev.rate_grid(FIG4, lengths, cands)
    res = ev.numeric_envelope(FIG4, lengths, cands, rates=grid)
    assert np.all(res.rates >= grid.max(axis=0) - 0)
    assert np.all(res.rates[None, :] >= grid)
    single = ev.numeric_envelope(FIG4, lengths, [4])
    assert np.array_equal(single.rates, ev.rate_grid(FIG4, lengths, [4])[0])
    fitted = res.n_star[res.fit_mask]
    assert np.all(np.diff(fitted) >= 0)
    assert 0 < res.fit_exponent <= 1
    far = ev.numeric_envelope(FIG4, [10000.0, 10001.0], [1])
    assert far.n_star.tolist() == [0, 0] and math.isnan(far.fit_exponent)
    with pytest.raises(ValueError):
        ev.numeric_envelope(FIG4, [], [1])


def test_crossover_helper():
    lengths = [0, 1, 2, 3]
    assert ev.envelope_crossover(lengths, [1, 1, 3, 4], [2, 2, 2, 2]) == pytest.approx(1 + math.log(2) / math.log(3))
    assert math.isnan(ev.envelope_crossover(lengths, [1, 1, 1, 1], [2, 2, 2, 2]))
    assert ev.envelope_crossover(lengths, [3, 3, 3, 3], [2, 2, 2, 2]) == 0
