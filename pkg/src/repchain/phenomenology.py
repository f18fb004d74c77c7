"""Empirical QBER model for sources with two-pair emission.

Built on the exact simulator: how the level-to-level QBER ratio and the
elementary-link QBER depend on ``p2``, and how many links a given ``p2``
tolerates before the end-to-end QBER crosses threshold.

End stations discard double clicks here by default. With that rule the
simulator reproduces the reference two-pair thresholds; with random bits for
double clicks every two-pair effect is roughly twice as strong.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from . import analytic
from .chain import simulate_chain
from .params import ChainConfig, SystemParams, solve_q_threshold

DEFAULT_P2_GRID: tuple[float, ...] = tuple(np.round(np.linspace(0.001, 0.055, 19), 6))
DEFAULT_RULE = "discard"
#: Total range of the level-ratio scan: 8 links of 6.25 km.
DEFAULT_SCAN_RANGE_KM = 50.0
SHORT_RANGE_KM = 10.0
SINGLE_LINK_MARGIN_KM = 10.0


class PhenomenologyError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QberScan:
    p2_grid: np.ndarray
    level_qbers: np.ndarray  # shape (len(p2_grid), max_level)
    ratios: np.ndarray  # shape (len(p2_grid), max_level - 1)
    slope: float
    intercept: float
    fit_max_p2: float

    @property
    def c_values(self) -> np.ndarray:
        """Level-averaged ratio ``C(p2)``."""
        return self.ratios.mean(axis=1)

    @property
    def level_spread(self) -> np.ndarray:
        """Largest minus smallest ``r_i`` at each ``p2``."""
        return self.ratios.max(axis=1) - self.ratios.min(axis=1)


def qber_ratio_scan(params: SystemParams, elem_length_km: float = DEFAULT_SCAN_RANGE_KM / 8,
                    max_level: int = 4, p2_grid: Sequence[float] = DEFAULT_P2_GRID,
                    fit_max_p2: float = 0.02, double_click: str = DEFAULT_RULE,
                    spread_tolerance: float | None = None) -> QberScan:
    """Level QBERs ``Q_1..Q_max_level`` of a ``2^(max_level-1)``-link chain for each ``p2``.

    ``C(p2)`` is fitted by least squares on grid points with ``p2 <= fit_max_p2``.
    If ``spread_tolerance`` is given, a level spread of ``r_i`` above it raises
    :class:`PhenomenologyError`.
    """
    if max_level < 2:
        raise ValueError("need at least two levels to form a ratio")
    n_links = 2 ** (max_level - 1)
    chain = ChainConfig(elem_length_km * n_links, n_links)
    grid = np.asarray(p2_grid, dtype=float)
    qs = np.array([simulate_chain(params.replace(p2=float(p2)), chain, double_click=double_click).level_qbers
                   for p2 in grid])
    ratios = (1.0 - 2.0 * qs[:, 1:]) / (1.0 - 2.0 * qs[:, :-1]) ** 2
    mask = grid <= fit_max_p2
    if np.count_nonzero(mask) >= 2:
        slope, intercept = np.polyfit(grid[mask], ratios[mask].mean(axis=1), 1)
    else:
        slope = intercept = math.nan
    scan = QberScan(grid, qs, ratios, float(slope), float(intercept), fit_max_p2)
    if spread_tolerance is not None and np.any(scan.level_spread > spread_tolerance):
        worst = int(np.argmax(scan.level_spread))
        raise PhenomenologyError(f"r_i varies by {scan.level_spread[worst]:.3g} across levels at p2={grid[worst]}")
    return scan


@dataclass(frozen=True)
class ElementaryFit:
    p2_grid: np.ndarray
    one_minus_2q: np.ndarray
    bound: np.ndarray  # t_d t_e - p2 / 2
    slope: float
    intercept: float
    residuals: np.ndarray

    @property
    def bound_holds(self) -> np.ndarray:
        return self.one_minus_2q >= self.bound


def elementary_qber_model(params: SystemParams, elem_length_km: float = 50.0,
                          p2_grid: Sequence[float] = (0.0, 0.005, 0.01, 0.015, 0.02),
                          double_click: str = DEFAULT_RULE) -> ElementaryFit:
    """Compare ``1 - 2 Q_1`` of one simulated link with the linear bound ``t_d t_e - p2/2``."""
    grid = np.asarray(p2_grid, dtype=float)
    chain = ChainConfig(elem_length_km, 1)
    values = np.array([1.0 - 2.0 * simulate_chain(params.replace(p2=float(p2)), chain,
                                                  double_click=double_click).q for p2 in grid])
    t_e, _, t_d = analytic.error_factors(params, chain)
    bound = t_d * t_e - 0.5 * grid
    slope, intercept = np.polyfit(grid, values, 1)
    residuals = values - (slope * grid + intercept)
    return ElementaryFit(grid, values, bound, float(slope), float(intercept), residuals)


def n_max_estimate(p2: float) -> float:
    """Lower estimate ``ceil(8/9 + (1/18)/p2)`` of the usable link count (``inf`` at p2 = 0)."""
    if p2 < 0:
        raise ValueError("p2 must be >= 0")
    if p2 == 0:
        return math.inf
    return math.ceil(8.0 / 9.0 + (1.0 / 18.0) / p2)


def simulated_qber(params: SystemParams, p2: float, n_links: int, range_km: float,
                   double_click: str = DEFAULT_RULE) -> float:
    return simulate_chain(params.replace(p2=p2), ChainConfig(range_km, n_links), double_click=double_click).q


def max_range_simulated(params: SystemParams, n_links: int, double_click: str = DEFAULT_RULE,
                        upper_km: float = 5000.0, xtol: float = 1e-6) -> float:
    """Range at which the simulated QBER reaches threshold (0 if already above at L=0)."""
    q_th = solve_q_threshold()
    f = lambda L: simulate_chain(params, ChainConfig(L, n_links), double_click=double_click).q - q_th
    if f(0.0) >= 0:
        return 0.0
    if f(upper_km) < 0:
        return math.inf
    return optimize.brentq(f, 0.0, upper_km, xtol=xtol)


@functools.lru_cache(maxsize=32)
def _single_link_range(params: SystemParams, double_click: str) -> float:
    return max_range_simulated(params.replace(p2=0.0), 1, double_click)


def rule_range(params: SystemParams, rule: str | float, double_click: str = DEFAULT_RULE,
               margin_km: float = SINGLE_LINK_MARGIN_KM) -> float:
    """Resolve a range rule: ``"10km"``, ``"single-link"`` (N=1 range minus a margin), or a number."""
    if isinstance(rule, (int, float)):
        return float(rule)
    if rule == "10km":
        return SHORT_RANGE_KM
    if rule == "single-link":
        return _single_link_range(params, double_click) - margin_km
    raise ValueError(f"unknown range rule {rule!r}; use '10km', 'single-link' or a number of km")


def chain_viable(params: SystemParams, p2: float, n_links: int, range_rule: str | float = "10km",
                 double_click: str = DEFAULT_RULE) -> bool:
    """Whether ``n_links`` links still give a QBER below threshold at the rule's range."""
    rng = rule_range(params, range_rule, double_click)
    return simulated_qber(params, p2, n_links, rng, double_click) < solve_q_threshold()


def p2_threshold(params: SystemParams, n_links: int, range_rule: str | float = "10km",
                 double_click: str = DEFAULT_RULE, xtol: float = 1e-6) -> float:
    """Two-pair probability at which ``Q(N)`` at the rule's range equals ``Q_th``."""
    rng = rule_range(params, range_rule, double_click)
    q_th = solve_q_threshold()
    f = lambda p2: simulated_qber(params, p2, n_links, rng, double_click) - q_th
    hi = 1.0 - params.p1
    if not hi > 0:
        raise PhenomenologyError("p1 = 1 leaves no room for two-pair emission")
    lo = 0.0
    if f(lo) >= 0:
        return 0.0
    if f(hi) < 0:
        raise PhenomenologyError(f"QBER stays below threshold up to p2 = {hi}")
    return optimize.bisect(f, lo, hi, xtol=xtol, maxiter=200)


def n_max_numeric(params: SystemParams, p2: float, range_rule: str | float = "10km",
                  candidates: Sequence[int] = (1, 2, 4, 8, 16), double_click: str = DEFAULT_RULE) -> int:
    """Largest candidate N still below threshold at the rule's range (0 if none)."""
    best = 0
    for n in sorted(candidates):
        if chain_viable(params, p2, n, range_rule, double_click):
            best = n
        else:
            break
    return best
