"""Rate-distance envelope: three-piece bounds, power-law exponents, numeric envelope.

With ``eta`` the end-to-end fiber transmittance, the zero-dark-click envelope
over the number of links is a power law ``A * eta**xi``; the corner points of
the three-piece bounds trace ``A * eta**t`` with ``t <= xi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from . import analytic
from .params import ChainConfig, SystemParams, db_to_linear, linear_to_db

DEFAULT_N_CANDIDATES: tuple[int, ...] = tuple(2 ** k for k in range(11))
XI_SCAN_POINTS = 10_000


class EnvelopeError(ArithmeticError):
    """The envelope construction is undefined for the given parameters."""


def prefactor_a(params: SystemParams) -> float:
    """``A = eta_d^2 / (eta_r^2 lambda_m^2 T_q)``."""
    return params.eta_d ** 2 / ((params.eta_r * params.lambda_m) ** 2 * params.t_q_seconds)


def slope_b(params: SystemParams) -> float:
    """``B = eta_r^2 lambda_m^2 eta_e^2 M / 4``."""
    return (params.eta_r * params.lambda_m * params.eta_e) ** 2 * params.m_modes / 4.0


def _range_of_transmittance(eta: float, alpha: float) -> float:
    return linear_to_db(eta) / alpha


@dataclass(frozen=True)
class ThreePieceBound:
    """Plateau, linear-in-transmittance segment, and zero-rate tail for one N."""

    n_links: int
    a: float
    b: float
    r_max: float
    eta_prime: float
    l_prime: float
    l_max: float
    alpha_db_per_km: float

    @property
    def slope_coefficient(self) -> float:
        """``A B^N``, multiplying the transmittance on the middle segment."""
        return self.a * self.b ** self.n_links

    def __call__(self, length_km: float) -> float:
        if length_km >= self.l_max:
            return 0.0
        eta = db_to_linear(self.alpha_db_per_km * length_km)
        return min(self.r_max, eta * self.slope_coefficient)


def three_piece_bound(params: SystemParams, n_links: int) -> ThreePieceBound:
    """Build the bound; ``l_max`` is the QKD range (infinite without center dark clicks)."""
    if n_links < 1:
        raise ValueError("n_links must be >= 1")
    a, b = prefactor_a(params), slope_b(params)
    r_max = a * ((params.eta_r * params.lambda_m) ** 2 / 2.0) ** n_links
    eta_prime = (2.0 / (params.m_modes * params.eta_e ** 2)) ** n_links
    # eta' >= 1 means the plateau is never reached at positive range.
    l_prime = _range_of_transmittance(eta_prime, params.alpha_db_per_km) if eta_prime < 1 else 0.0
    return ThreePieceBound(
        n_links=n_links, a=a, b=b, r_max=r_max, eta_prime=eta_prime, l_prime=l_prime,
        l_max=analytic.max_range_qkd(params, n_links), alpha_db_per_km=params.alpha_db_per_km,
    )


def three_piece_rate(params: SystemParams, n_links: int, length_km: float) -> float:
    return three_piece_bound(params, n_links)(length_km)


def exponent_t(params: SystemParams) -> float:
    """Exponent of the envelope of the three-piece bounds."""
    num = (params.eta_r * params.lambda_m) ** 2 / 2.0
    den = 2.0 / (params.m_modes * params.eta_e ** 2)
    if not (num < 1.0 and den < 1.0):
        raise EnvelopeError(
            "exponent t needs eta_r^2 lambda_m^2 < 2 and M eta_e^2 > 2 "
            f"(got {2 * num:.6g} and {2 / den:.6g})")
    return math.log(num) / math.log(den)


def _xi_terms(params: SystemParams):
    beta = (params.eta_r * params.lambda_m) ** 2 / 2.0
    gamma = params.eta_e ** 2 / 2.0
    m = params.m_modes

    def link(z):
        # 1 - (1 - gamma z)^M, accurate for small gamma z
        return -np.expm1(m * np.log1p(-gamma * z))

    def residual(z):
        p = link(z)
        return p * np.log(beta * p) - gamma * m * z * np.log(z) * np.exp((m - 1) * np.log1p(-gamma * z))

    return beta, link, residual


@dataclass(frozen=True)
class XiSolution:
    xi: float
    z: float
    residual: float


def exponent_xi(params: SystemParams) -> XiSolution:
    """Solve the transcendental envelope condition for ``z`` and return ``xi``.

    The bracket comes from a scan of (0, 1): uniform, plus a geometric grid
    below the first uniform point. Bisection then runs to a relative ``z``
    tolerance of ``1e-13``. Parameters that do not produce exactly one sign
    change raise :class:`EnvelopeError` with the scanned sign profile.
    """
    beta, link, residual = _xi_terms(params)
    if not 0.0 < beta < 1.0:
        raise EnvelopeError(f"beta = eta_r^2 lambda_m^2 / 2 must lie in (0, 1), got {beta!r}")
    # Uniform scan, refined geometrically near 0 where the root sits once gamma*M is large.
    uniform = np.linspace(0.0, 1.0, XI_SCAN_POINTS + 1)[1:-1]
    grid = np.concatenate([np.geomspace(1e-15, uniform[0], XI_SCAN_POINTS, endpoint=False), uniform])
    with np.errstate(divide="ignore", invalid="ignore"):
        values = residual(grid)
    signs = np.sign(values)
    changes = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    if changes.size != 1 or not np.all(np.isfinite(values)):
        runs = []
        for s in signs:
            label = {1.0: "+", -1.0: "-", 0.0: "0"}.get(float(s), "nan")
            if not runs or runs[-1][0] != label:
                runs.append([label, 0])
            runs[-1][1] += 1
        profile = " ".join(f"{label}x{count}" for label, count in runs)
        raise EnvelopeError(f"expected one sign change of the xi residual on (0, 1), found "
                            f"{changes.size}; sign profile: {profile}")
    k = changes[0]
    z = optimize.bisect(lambda x: float(residual(x)), grid[k], grid[k + 1],
                         xtol=1e-13 * grid[k], maxiter=400)
    xi = math.log(beta * float(link(z))) / math.log(z)
    return XiSolution(xi=xi, z=z, residual=float(residual(z)))


def xi_vs_m(params: SystemParams, m_values: Sequence[int]) -> list[float]:
    """``xi`` for each M; NaN where the envelope condition has no root."""
    out = []
    for m in m_values:
        try:
            out.append(exponent_xi(params.replace(m_modes=int(m))).xi)
        except EnvelopeError:
            out.append(math.nan)
    return out


def minimum_modes(params: SystemParams, m_upper: int = 10 ** 7) -> int:
    """Smallest M with ``xi(M) < 1``, i.e. the least multiplexing that beats repeaterless scaling."""

    def beats(m: int) -> bool:
        try:
            return exponent_xi(params.replace(m_modes=m)).xi < 1.0
        except EnvelopeError:
            return False

    if not beats(m_upper):
        raise EnvelopeError(f"xi stays >= 1 up to M = {m_upper}")
    lo, hi = 1, m_upper
    if beats(lo):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if beats(mid):
            hi = mid
        else:
            lo = mid
    return hi


def tgw_rate(eta: float, m_modes: int, t_q: float) -> float:
    """Repeaterless capacity bound summed over M modes, bits/s (``inf`` at unit transmittance)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {eta!r}")
    if eta == 1.0:
        return math.inf
    return m_modes * (math.log1p(eta) - math.log1p(-eta)) / math.log(2.0) / t_q


def bb84_ideal_rate(eta: float, m_modes: int, t_q: float) -> float:
    """Ideal single-photon BB84 on M parallel modes, ``eta M / T_q``."""
    return eta * m_modes / t_q


@dataclass(frozen=True)
class EnvelopeResult:
    lengths_km: np.ndarray
    rates: np.ndarray
    n_star: np.ndarray  # 0 where every candidate gives zero rate
    fit_exponent: float
    fit_prefactor: float
    fit_mask: np.ndarray

    @property
    def label(self) -> str:
        return "envelope"


def rate_grid(params: SystemParams, lengths_km: Sequence[float], n_candidates: Sequence[int]) -> np.ndarray:
    """Key rates with shape ``(len(n_candidates), len(lengths_km))``."""
    return np.array([[analytic.secret_key_rate(params, ChainConfig(float(L), int(n))) for L in lengths_km]
                     for n in n_candidates])


def numeric_envelope(params: SystemParams, lengths_km: Sequence[float],
                     n_candidates: Sequence[int] = DEFAULT_N_CANDIDATES,
                     rates: np.ndarray | None = None) -> EnvelopeResult:
    """Maximum over N of the key rate, its argmax, and a power-law fit ``R = A eta^zeta``.

    The fit uses grid points with positive rate lying beyond the plateau
    corner of the smallest candidate N.
    """
    lengths = np.asarray(lengths_km, dtype=float)
    cands = np.asarray(n_candidates, dtype=int)
    if lengths.size == 0 or cands.size == 0:
        raise ValueError("length grid and N candidates must be non-empty")
    if rates is None:
        rates = rate_grid(params, lengths, cands)
    best = np.argmax(rates, axis=0)
    env = rates[best, np.arange(lengths.size)]
    n_star = np.where(env > 0, cands[best], 0)
    corner = three_piece_bound(params, int(cands.min())).l_prime
    mask = (env > 0) & (lengths > corner)
    if np.count_nonzero(mask) >= 2:
        log_eta = -params.alpha_db_per_km * lengths[mask] / 10.0 * math.log(10.0)
        slope, intercept = np.polyfit(log_eta, np.log(env[mask]), 1)
        zeta, pref = float(slope), float(math.exp(intercept))
    else:
        zeta = pref = math.nan
    return EnvelopeResult(lengths, env, n_star, zeta, pref, mask)


def envelope_crossover(lengths_km: Sequence[float], envelope: Sequence[float], baseline: Sequence[float]) -> float:
    """Smallest grid length beyond which the envelope stays above the baseline (NaN if never)."""
    env = np.asarray(envelope)
    base = np.asarray(baseline)
    lengths = np.asarray(lengths_km)
    above = env > base
    if not above[-1]:
        return math.nan
    below = np.nonzero(~above)[0]
    if below.size == 0:
        return float(lengths[0])
    k = below[-1]
    # Linear interpolation of log(env/base) between the straddling points.
    d0 = math.log(env[k] / base[k]) if env[k] > 0 else -np.inf
    d1 = math.log(env[k + 1] / base[k + 1])
    if not math.isfinite(d0):
        return float(lengths[k + 1])
    return float(lengths[k] + (lengths[k + 1] - lengths[k]) * (-d0) / (d1 - d0))


def tgw_crossover(params: SystemParams, lengths_km: Sequence[float],
                  n_candidates: Sequence[int] = DEFAULT_N_CANDIDATES) -> float:
    """Range above which the repeater envelope beats the M-mode repeaterless bound."""
    result = numeric_envelope(params, lengths_km, n_candidates)
    tgw = [tgw_rate(db_to_linear(params.alpha_db_per_km * L), params.m_modes, params.t_q_seconds)
           for L in result.lengths_km]
    return envelope_crossover(result.lengths_km, result.rates, tgw)
