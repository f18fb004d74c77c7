import json
import math

import numpy as np
import pytest

from repchain import analytic as an
from repchain import phenomenology as ph
from repchain.chain import (ALL_PATTERNS, LinkDensity, ab_measure, bell_diagonal_weights, bsm, bsm_density,
                            elementary_link, qber_from_patterns, qubit_basis, simulate_chain, state_dump)
from repchain.fock import CutoffOverflowError, DetectorModel, PureEnsemble, loss_fold, mplus, source_state
from repchain.params import FIG4, FIG8, ChainConfig

from conftest import random_params

IDEAL_DET = DetectorModel(0.0, 1.0)


def mplus_density():
    return LinkDensity.from_vector(mplus(2), qubit_basis(1))


def test_ideal_bsm_heralds_bell_state():
    out = bsm(PureEnsemble.pure(mplus(2)), PureEnsemble.pure(mplus(2)), IDEAL_DET, cutoff=2)
    assert out.success_prob == pytest.approx(0.5, abs=1e-15)
    assert sum(out.pattern_probs.values()) == pytest.approx(0.5)
    assert set(out.bell_sign.values()) == {1, -1}
    (w, vec), = out.post_state.branches
    assert w == pytest.approx(1.0) and abs(abs(vec.inner(mplus(2))) - 1) < 1e-12


def test_elementary_link_matches_analytic():
    chain = ChainConfig(200.0, 4)
    p_single, rho = elementary_link(FIG4, chain)
    el = an.elementary_coeffs(FIG4, chain)
    assert p_single == pytest.approx(el.p_s0, rel=1e-12)
    sim = bell_diagonal_weights(rho)
    ref = el.link_state().normalized()
    for got, want in ((sim.a + sim.d, ref.a + ref.d), (sim.b + sim.d, ref.b + ref.d), (sim.c, ref.c)):
        assert got == pytest.approx(want, abs=1e-12)


def test_repeater_swap_probability_is_4s():
    rep = an.repeater_coeffs(FIG4)
    det = loss_fold(DetectorModel(FIG4.p_dark_r, FIG4.eta_r), FIG4.lambda_m)
    _, rho = elementary_link(FIG4, ChainConfig(100.0, 1))
    res = bsm_density(rho, rho, det, cutoff=2)
    assert res.success_prob == pytest.approx(rep.p_swap, rel=1e-12)


def test_exact_mixing_matches_simulation():
    for n in (2, 4, 8):
        chain = ChainConfig(150.0 * n, n)
        sim = bell_diagonal_weights(simulate_chain(FIG4, chain).state)
        ref = an.chain_state(FIG4, chain, mixing="exact").normalized()
        for got, want in ((sim.a + sim.d, ref.a + ref.d), (sim.b + sim.d, ref.b + ref.d), (sim.c, ref.c)):
            assert got == pytest.approx(want, abs=1e-13)


def test_ab_measure_ideal_bell_state():
    probs = ab_measure(mplus_density(), IDEAL_DET)
    assert set(probs) == set(ALL_PATTERNS)
    assert probs[(1, 0, 0, 1)] == pytest.approx(0.5) and probs[(0, 1, 1, 0)] == pytest.approx(0.5)
    assert sum(probs.values()) == pytest.approx(1.0, abs=1e-12)
    assert qber_from_patterns(probs).qber == 0.0
    rot = ab_measure(mplus_density(), IDEAL_DET, rotated=True)
    assert sum(v for k, v in rot.items() if k in {(0, 1, 0, 1), (1, 0, 1, 0)}) == pytest.approx(1.0)
    assert qber_from_patterns(rot, rotated=True).qber == pytest.approx(0.0, abs=1e-15)


def test_sift_and_qber_match_closed_form():
    for n in (1, 2, 4):
        chain = ChainConfig(300.0, n)
        sim = simulate_chain(FIG4, chain)
        assert sim.p_sift == pytest.approx(an.sift_model(FIG4).p_sift, rel=1e-12)
        assert sim.q == pytest.approx(an.qber(FIG4, chain), rel=1e-12)


def test_ab_probabilities_sum_to_one(rng):
    for _ in range(50):
        p2 = rng.uniform(0, 0.05)
        params = FIG8.replace(p2=p2)
        _, rho = elementary_link(params, ChainConfig(rng.uniform(0, 300), 1))
        det = DetectorModel(rng.uniform(0, 1e-3), rng.uniform(0.3, 1))
        for rotated in (False, True):
            assert abs(sum(ab_measure(rho, det, rotated).values()) - 1) < 1e-12


def test_oracle_equivalence_sample(rng):
    for _ in range(10):
        params = random_params(rng)
        n = int(rng.integers(1, 5))
        chain = ChainConfig(rng.uniform(0, 150 * n), n)
        sim = simulate_chain(params, chain)
        for got, want in ((sim.q, an.qber(params, chain)),
                          (sim.p_succ, an.success_probability(params, chain)),
                          (sim.p_sift, an.sift_model(params).p_sift),
                          (sim.rate, an.secret_key_rate(params, chain))):
            assert got == pytest.approx(want, rel=1e-9, abs=1e-300)


def test_cutoff_two_and_four_identical():
    chain = ChainConfig(400.0, 4)
    a = simulate_chain(FIG4, chain, cutoff=2)
    b = simulate_chain(FIG4, chain, cutoff=4)
    assert (a.q, a.p_succ, a.p_sift, a.rate) == (b.q, b.p_succ, b.p_sift, b.rate)


def test_two_pair_needs_cutoff_four():
    with pytest.raises(CutoffOverflowError):
        simulate_chain(FIG8.replace(p2=0.01), ChainConfig(10.0, 2), cutoff=2)


def test_source_vacuum_fold_in():
    """Folding p1 into the center efficiency reproduces success probabilities and, to ~1%, the range."""
    for n in (1, 2, 4):
        chain = ChainConfig(150.0 * n, n)
        sim = simulate_chain(FIG8, chain)
        assert sim.p_succ == pytest.approx(an.success_probability(FIG8, chain), rel=1e-4)
    assert ph.max_range_simulated(FIG8, 1, "random") == pytest.approx(an.max_range_qkd(FIG8, 1), rel=0.02)


def test_general_n_sequential():
    for n in (3, 5, 6):
        chain = ChainConfig(100.0 * n, n)
        sim = simulate_chain(FIG4, chain)
        assert sim.q == pytest.approx(an.qber(FIG4, chain), rel=1e-12)
        assert sim.p_succ == pytest.approx(an.success_probability(FIG4, chain), rel=1e-12)


def test_level_bookkeeping():
    sim = simulate_chain(FIG4, ChainConfig(800.0, 8))
    assert len(sim.level_qbers) == 4 and len(sim.swap_success) == 3
    assert all(b >= a for a, b in zip(sim.level_qbers, sim.level_qbers[1:]))
    assert sim.q == sim.level_qbers[-1]
    d = sim.to_dict()
    assert d["qber"] == sim.q and d["state_coeffs"] is not None
    assert isinstance(json.loads(state_dump(sim)), list)


def test_rotated_basis_close_to_computational():
    sim = simulate_chain(FIG4, ChainConfig(600.0, 4))
    assert abs(sim.q_rotated - sim.q) < 1e-3


def test_double_click_rule_validation():
    with pytest.raises(ValueError):
        simulate_chain(FIG4, ChainConfig(10.0, 1), double_click="keep")


def test_n2_range_stable_for_small_two_pair():
    """With the fig8 preset the N=2 maximum range barely moves for p2 in [0.001, 0.019]."""
    lo = ph.max_range_simulated(FIG8.replace(p2=0.001), 2)
    hi = ph.max_range_simulated(FIG8.replace(p2=0.019), 2)
    assert abs(hi - lo) / lo < 0.02


def test_rate_unaffected_below_threshold():
    """At a tenth of the numeric threshold the mid-range rate stays within 5% of the p2 = 0 rate."""
    for n in (2, 4, 8):
        p2 = 0.1 * ph.p2_threshold(FIG8, n, "10km")
        chain = ChainConfig(ph.max_range_simulated(FIG8, n) / 2, n)
        rate = simulate_chain(FIG8.replace(p2=p2), chain, double_click="discard").rate
        assert rate == pytest.approx(an.secret_key_rate(FIG8, chain), rel=0.05), n


def test_simulation_is_fast():
    import time
    t0 = time.perf_counter()
    simulate_chain(FIG8.replace(p2=0.01), ChainConfig(50.0, 1))
    assert time.perf_counter() - t0 < 5.0
