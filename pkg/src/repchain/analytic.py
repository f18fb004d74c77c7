"""Closed-form performance of the repeater chain with ideal single-pair sources.

The shared two-qubit state after connecting links is diagonal in the basis
{|M+>, |M->, |01,01>, |01,10>, |10,01>, |10,10>} with (unnormalized) weights
(a, b, c, d, d, c). Everything here follows from how those four numbers move
through a linear-optic swap with lossy, noisy on/off detectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .params import ChainConfig, SystemParams, bb84_rate, shannon_entropy, solve_q_threshold

#: Returned by the range functions when no finite cutoff exists.
UNBOUNDED = math.inf

# Bracket (km) for numerical range searches.
RANGE_BRACKET_KM = (0.0, 1e5)


def _nonneg(name: str, value: float, scale: float) -> None:
    if value < -1e-12 * max(scale, 1e-300):
        raise ValueError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class LinkStateCoeffs:
    """Weights of |M+>, |M->, the correlated pair (c, twice) and anti-correlated pair (d, twice)."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        scale = abs(self.a) + abs(self.b) + abs(self.c) + abs(self.d)
        for name in "abcd":
            _nonneg(name, getattr(self, name), scale)
        if not self.s > 0:
            raise ValueError("link state has zero total weight")

    @property
    def s(self) -> float:
        return self.a + self.b + 2.0 * (self.c + self.d)

    def as_vector(self) -> np.ndarray:
        """Six-component form (a, b, c, d, d, c)."""
        return np.array([self.a, self.b, self.c, self.d, self.d, self.c])

    def normalized(self) -> "LinkStateCoeffs":
        s = self.s
        return LinkStateCoeffs(self.a / s, self.b / s, self.c / s, self.d / s)

    @property
    def fidelity(self) -> float:
        """Overlap with |M+>."""
        return (self.a + self.d) / self.s

    @property
    def classical_fraction(self) -> float:
        """``2c/s``, the weight that turns into bit errors."""
        return 2.0 * self.c / self.s


def _swap_weights(p_dark: float, eta: float) -> tuple[float, float, float]:
    # Detector click probabilities for one and two impinging photons.
    big_a, big_b = detector_derived(p_dark, eta)
    p = p_dark
    a = (p * p * (1 - big_a) ** 2 + big_a * big_a * (1 - p) ** 2) / 8.0
    b = 2.0 * big_a * p * (1 - big_a) * (1 - p) / 8.0
    c = p * (1 - p) * (p * (1 - big_b) + big_b * (1 - p)) / 8.0
    return a, b, c


def detector_derived(p_dark: float, eta_eff: float) -> tuple[float, float]:
    """Click probabilities ``(A, B)`` of an on/off detector hit by one or two photons."""
    # 1 - (1-P)(1-eta)^n without cancellation when P and eta are tiny
    if eta_eff >= 1.0:
        return 1.0, 1.0
    lp, le = math.log1p(-p_dark), math.log1p(-eta_eff)
    return -math.expm1(lp + le), -math.expm1(lp + 2.0 * le)


@dataclass(frozen=True)
class ElementaryCoeffs:
    a_e: float
    b_e: float
    c_e: float

    @property
    def s1(self) -> float:
        return self.a_e + self.b_e + 2.0 * self.c_e

    @property
    def w1(self) -> float:
        return self.c_e / (self.a_e + self.b_e)

    @property
    def t_e(self) -> float:
        z = self.a_e + self.b_e
        return (z - 2.0 * self.c_e) / (z + 2.0 * self.c_e)

    @property
    def p_s0(self) -> float:
        """Heralding probability of one frequency mode at the link center."""
        return 4.0 * self.s1

    def link_state(self) -> LinkStateCoeffs:
        return LinkStateCoeffs(self.a_e, self.b_e, self.c_e, 0.0)


@dataclass(frozen=True)
class RepeaterCoeffs:
    a: float
    b: float
    c: float

    @property
    def s(self) -> float:
        return self.a + self.b + 2.0 * self.c

    @property
    def w_r(self) -> float:
        return self.c / (self.a + self.b)

    @property
    def t_r(self) -> float:
        z = self.a + self.b
        return (z - 2.0 * self.c) / (z + 2.0 * self.c)

    @property
    def p_swap(self) -> float:
        """Success probability of one repeater-node swap, ``4s``."""
        return 4.0 * self.s


@dataclass(frozen=True)
class SiftModel:
    """No-flip, flip and double-click probabilities of one party's detector pair."""

    q1: float
    q2: float
    q3: float
    a_d: float

    @property
    def p_sift(self) -> float:
        return (self.q1 + self.q2 + self.q3) ** 2

    @property
    def t_d(self) -> float:
        return ((self.q1 - self.q2) / (self.q1 + self.q2 + self.q3)) ** 2


def effective_center_efficiency(params: SystemParams, chain: ChainConfig) -> float:
    """Center-detector efficiency with fiber loss and source vacuum folded in."""
    return params.eta_e * chain.half_link_transmittance(params.alpha_db_per_km) * params.p1


def elementary_coeffs(params: SystemParams, chain: ChainConfig) -> ElementaryCoeffs:
    return ElementaryCoeffs(*_swap_weights(params.p_dark_e, effective_center_efficiency(params, chain)))


def repeater_coeffs(params: SystemParams) -> RepeaterCoeffs:
    return RepeaterCoeffs(*_swap_weights(params.p_dark_r, params.eta_r * params.lambda_m))


def sift_model(params: SystemParams) -> SiftModel:
    p, eta = params.p_dark_d, params.eta_d
    a_d = eta + (1.0 - eta) * p
    return SiftModel(q1=(1 - p) * a_d, q2=(1 - a_d) * p, q3=p * a_d, a_d=a_d)


def swap_step(prev: LinkStateCoeffs, rep: RepeaterCoeffs) -> LinkStateCoeffs:
    """Connect two identical copies of ``prev`` at a repeater node."""
    ai, bi, ci, di = prev.a, prev.b, prev.c, prev.d
    a, b, c = rep.a, rep.b, rep.c
    s2 = prev.s ** 2
    zi = ai + bi
    return LinkStateCoeffs(
        a=(a * ai * ai + (a + b) * ai * bi + b * bi * bi) / s2,
        b=(b * ai * ai + (a + b) * ai * bi + a * bi * bi) / s2,
        c=(c * zi * zi + 2 * (a + b) * ci * (zi + 2 * di) + 4 * c * (di * zi + ci * ci + di * di)) / s2,
        d=(4 * c * ci * (zi + 2 * di) + 2 * (a + b) * (di * zi + ci * ci + di * di)) / s2,
    )


MIXING_MODES = ("tabulated", "exact")


def _check_mixing(mixing: str) -> None:
    if mixing not in MIXING_MODES:
        raise ValueError(f"mixing must be one of {MIXING_MODES}, got {mixing!r}")


def swap_tensor(rep: RepeaterCoeffs, mixing: str = "tabulated") -> np.ndarray:
    """The 6x6x6 tensor ``C[j, k, l]`` of the bilinear swap map on six-component weights.

    ``mixing="tabulated"`` uses the standard recursion table, in which a left |M-> acts
    like a left |M+>. ``mixing="exact"`` follows the Bell-state algebra
    instead (|M-> with |M-> heralds |M+>); only the |M+>/|M-> split differs,
    and with it the fidelity and hashing bound for N >= 2. QBER and success
    probabilities are the same under both.
    """
    _check_mixing(mixing)
    a, b, c = rep.a, rep.b, rep.c
    ab = a + b
    rows = {
        (0, 0): [a, b, c, 0, 0, c],
        (0, 1): [b, a, c, 0, 0, c],
        (0, 2): [0, 0, ab, 0, 2 * c, 0],
        (0, 3): [0, 0, 0, ab, 0, 2 * c],
        (0, 4): [0, 0, 2 * c, 0, ab, 0],
        (0, 5): [0, 0, 0, 2 * c, 0, ab],
        (2, 0): [0, 0, ab, 2 * c, 0, 0],
        (2, 2): [0, 0, 4 * c, 0, 0, 0],
        (2, 3): [0, 0, 0, 4 * c, 0, 0],
        (2, 4): [0, 0, 2 * ab, 0, 0, 0],
        (2, 5): [0, 0, 0, 2 * ab, 0, 0],
        (3, 0): [0, 0, 2 * c, ab, 0, 0],
        (3, 2): [0, 0, 2 * ab, 0, 0, 0],
        (3, 3): [0, 0, 0, 2 * ab, 0, 0],
        (3, 4): [0, 0, 4 * c, 0, 0, 0],
        (3, 5): [0, 0, 0, 4 * c, 0, 0],
        (4, 0): [0, 0, 0, 0, ab, 2 * c],
        (4, 2): [0, 0, 0, 0, 4 * c, 0],
        (4, 3): [0, 0, 0, 0, 0, 4 * c],
        (4, 4): [0, 0, 0, 0, 2 * ab, 0],
        (4, 5): [0, 0, 0, 0, 0, 2 * ab],
        (5, 0): [0, 0, 0, 0, 2 * c, ab],
        (5, 2): [0, 0, 0, 0, 2 * ab, 0],
        (5, 3): [0, 0, 0, 0, 0, 2 * ab],
        (5, 4): [0, 0, 0, 0, 4 * c, 0],
        (5, 5): [0, 0, 0, 0, 0, 4 * c],
    }
    # |M-> on the left acts like |M+> (rows j=1 copy j=0); on the right the
    # second Bell state shares the first's entries for k>=2.
    for k in range(6):
        rows[(1, k)] = rows[(0, k)]
    if mixing == "exact":
        rows[(1, 0)], rows[(1, 1)] = rows[(0, 1)], rows[(0, 0)]
    for j in range(2, 6):
        rows[(j, 1)] = rows[(j, 0)]
    tensor = np.zeros((6, 6, 6))
    for (j, k), row in rows.items():
        tensor[j, k] = row
    return tensor


def full_swap_tensor_step(r: np.ndarray, rep: RepeaterCoeffs) -> np.ndarray:
    """Unnormalized bilinear swap ``r'_l = sum_jk C[j,k,l] r_j r_k``."""
    r = np.asarray(r, dtype=float)
    if r.shape != (6,) or np.any(r < 0):
        raise ValueError("expected six nonnegative weights")
    return np.einsum("jkl,j,k->l", swap_tensor(rep), r, r)


def connect(left: LinkStateCoeffs, right: LinkStateCoeffs, rep: RepeaterCoeffs,
            mixing: str = "tabulated") -> LinkStateCoeffs:
    """Swap two (possibly different) link states; reduces to :func:`swap_step` when equal."""
    r = np.einsum("jkl,j,k->l", swap_tensor(rep, mixing), left.as_vector(), right.as_vector())
    r /= left.s * right.s
    return LinkStateCoeffs(a=r[0], b=r[1], c=0.5 * (r[2] + r[5]), d=0.5 * (r[3] + r[4]))


def logistic_solution(w1: float, wr: float, i: int) -> float:
    """Level-``i`` solution of ``w_{k+1} = wr + 2(1-2wr) w_k (1-w_k)`` started at ``w1``."""
    if i < 1:
        raise ValueError("level index starts at 1")
    mu = 1.0 - 2.0 * wr
    return 0.5 * (1.0 - (mu * (1.0 - 2.0 * w1)) ** (2 ** (i - 1)) / mu)


def closed_form_coeffs(params: SystemParams, chain: ChainConfig, i: int) -> LinkStateCoeffs:
    """State after ``i`` connection levels (``2**(i-1)`` links of length L/N).

    Weights are on the scale where ``s_i = a + b + 2c`` of the repeater swap
    for ``i >= 2`` (``s_1`` of the elementary link for ``i = 1``).
    """
    if i < 1:
        raise ValueError("level index starts at 1")
    el = elementary_coeffs(params, chain)
    if i == 1:
        return el.link_state()
    rep = repeater_coeffs(params)
    w1, wr = el.w1, rep.w_r
    s = rep.s
    power = 2 ** (i - 1)
    z = (s * s / (rep.a + rep.b)) * (1.0 / ((1 + 2 * w1) * (1 + 2 * wr))) ** power
    bell_bias = ((rep.a - rep.b) / (rep.a + rep.b)) ** (i - 1) * (el.a_e - el.b_e) / (el.a_e + el.b_e)
    beta = 1.0 - 2.0 * wr
    decay = (beta * (1.0 - 2.0 * w1)) ** power
    return LinkStateCoeffs(
        a=0.5 * (1 + bell_bias) * z,
        b=0.5 * (1 - bell_bias) * z,
        c=s / 4.0 * (1.0 - z / (s * beta) * decay),
        d=s / 4.0 - z / 2.0 * (1.0 - decay / (2.0 * beta)),
    )


def chain_state(params: SystemParams, chain: ChainConfig, mixing: str = "tabulated") -> LinkStateCoeffs:
    """End-to-end state: closed form for powers of two, left-to-right swaps otherwise.

    With ``mixing="exact"`` powers of two are built level by level with the
    corrected swap table (no closed form is used).
    """
    _check_mixing(mixing)
    levels = chain.levels
    elem = elementary_coeffs(params, chain).link_state()
    rep = repeater_coeffs(params)
    if levels is not None:
        if mixing == "tabulated":
            return closed_form_coeffs(params, chain, levels)
        state = elem
        for _ in range(levels - 1):
            state = connect(state, state, rep, mixing)
        return state
    state = elem
    for _ in range(chain.n_links - 1):
        state = connect(state, elem, rep, mixing)
    return state


def error_factors(params: SystemParams, chain: ChainConfig) -> tuple[float, float, float]:
    """``(t_e, t_r, t_d)`` for the elementary link, repeater swap and end detection."""
    return (elementary_coeffs(params, chain).t_e, repeater_coeffs(params).t_r, sift_model(params).t_d)


def qber(params: SystemParams, chain: ChainConfig) -> float:
    """End-to-end QBER with ``N = chain.n_links`` links."""
    t_e, t_r, t_d = error_factors(params, chain)
    return 0.5 * (1.0 - (t_d / t_r) * (t_r * t_e) ** chain.n_links)


def qber_from_state(params: SystemParams, state: LinkStateCoeffs) -> float:
    """QBER from the classical-correlation fraction of a state."""
    return 0.5 * (1.0 - sift_model(params).t_d * (1.0 - 2.0 * state.classical_fraction))


def link_success_probability(params: SystemParams, chain: ChainConfig) -> float:
    """Probability that at least one of the M frequency modes heralds a link."""
    p_s0 = elementary_coeffs(params, chain).p_s0
    if p_s0 >= 1.0:
        return 1.0
    return -math.expm1(params.m_modes * math.log1p(-p_s0))


def success_probability(params: SystemParams, chain: ChainConfig) -> float:
    """Probability that all N links and N-1 swaps succeed."""
    p_link = link_success_probability(params, chain)
    p_swap = repeater_coeffs(params).p_swap
    n = chain.n_links
    value = p_swap ** (n - 1) * p_link ** n
    return min(max(value, 0.0), 1.0)


def secret_key_rate(params: SystemParams, chain: ChainConfig) -> float:
    """Secret-key bits per second."""
    p_sift = sift_model(params).p_sift
    return p_sift * success_probability(params, chain) * bb84_rate(qber(params, chain)) / (2.0 * params.t_q_seconds)


def fidelity(params: SystemParams, chain: ChainConfig, mixing: str = "tabulated") -> float:
    return chain_state(params, chain, mixing).fidelity


def hashing_bound(coeffs: LinkStateCoeffs) -> float:
    """Coherent information of the Bell-diagonal-like state, in ebits per copy (may be negative)."""
    s = coeffs.s
    probs = (coeffs.c / s, coeffs.c / s, (coeffs.a + coeffs.d) / s, (coeffs.b + coeffs.d) / s)
    return 1.0 - shannon_entropy([max(p, 0.0) for p in probs])


def distillation_rate(params: SystemParams, chain: ChainConfig, mixing: str = "tabulated") -> float:
    """One-way distillable ebits per second (hashing bound, floored at zero)."""
    info = hashing_bound(chain_state(params, chain, mixing))
    return success_probability(params, chain) * max(info, 0.0) / params.t_q_seconds


def max_range_qkd(params: SystemParams, n_links: int) -> float:
    """Largest L (km) at which the QBER stays below threshold; ``UNBOUNDED`` if none.

    Inverts the QBER expression in closed form for the elementary-link
    transmittance.
    """
    q_th = solve_q_threshold()
    _, t_r, t_d = error_factors(params, ChainConfig(0.0, n_links))
    if params.p_dark_e == 0.0:
        # QBER no longer depends on L.
        return UNBOUNDED if 0.5 * (1 - (t_d / t_r) * t_r ** n_links) < q_th else 0.0
    p = params.p_dark_e
    h = 1.0 + t_r / ((1.0 - 2.0 * q_th) * t_r / t_d) ** (1.0 / n_links)
    arg = params.eta_e * params.p1 * (math.sqrt(2.0 * (1.0 - 2.0 * p) * h) - 2.0 * (1.0 - 2.0 * p)) / (4.0 * p)
    if not arg > 1.0:
        return 0.0
    return (20.0 * n_links / params.alpha_db_per_km) * math.log10(arg)


def _first_root(fn, lo: float, hi: float, xtol: float, samples: int = 4001) -> float | None:
    """Root of ``fn`` at its first sign change from positive on a uniform scan of [lo, hi]."""
    grid = np.linspace(lo, hi, samples)
    values = np.array([fn(x) for x in grid])
    if values[0] <= 0:
        return lo
    below = np.nonzero(values <= 0)[0]
    if below.size == 0:
        return None
    k = below[0]
    return optimize.bisect(fn, grid[k - 1], grid[k], xtol=xtol, maxiter=200)


def max_range_qkd_bisect(params: SystemParams, n_links: int, xtol: float = 1e-6) -> float:
    """Same as :func:`max_range_qkd` by bisection on ``Q(N; L) = Q_th``."""
    q_th = solve_q_threshold()
    root = _first_root(lambda L: q_th - qber(params, ChainConfig(L, n_links)), *RANGE_BRACKET_KM, xtol=xtol)
    return UNBOUNDED if root is None else root


def approx_max_range(params: SystemParams, n_links: int) -> float:
    """First-order range estimate for small dark counts and near-unit efficiencies."""
    q_th = solve_q_threshold()
    inner = math.sqrt(2.0 * (1.0 + (1.0 - 2.0 * q_th) ** (-1.0 / n_links))) - 2.0
    return (20.0 * n_links / params.alpha_db_per_km) * math.log10(inner / (4.0 * params.p_dark_e))


def max_range_distillation(params: SystemParams, n_links: int, xtol: float = 1e-6,
                           mixing: str = "tabulated") -> float:
    """Largest L (km) with positive hashing bound; ``UNBOUNDED`` if none below 1e5 km."""
    if params.p_dark_e == 0.0:
        info = hashing_bound(chain_state(params, ChainConfig(0.0, n_links), mixing))
        return UNBOUNDED if info > 0 else 0.0
    root = _first_root(lambda L: hashing_bound(chain_state(params, ChainConfig(L, n_links), mixing)),
                       *RANGE_BRACKET_KM, xtol=xtol)
    return UNBOUNDED if root is None else root
