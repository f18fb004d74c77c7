"""Exact repeater-chain simulation for sources with vacuum, one-pair and two-pair terms.

Each dual-rail qubit lives in the span of two-mode Fock states holding at most
as many photons as one source emission puts there (one, or two when two-pair
emission is on). A link is a density tensor ``rho[a, b, A, B]`` over the
left-end qubit ``a`` and the right-end qubit ``b``. A Bell measurement on the
inner qubits of two links contracts

    rho'[a, d, A, D] = sum G[b, c, B, C] rho_L[a, b, A, B] rho_R[c, d, C, D]

where ``G`` collects the detector POVM weights of the accepted click patterns
after the two 50-50 beamsplitters. Everything is exact enumeration.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .analytic import LinkStateCoeffs
from .fock import (CutoffOverflowError, DetectorModel, FockVector, MAX_DISCARDED_MASS, Occupation,
                   PRUNE_THRESHOLD, PureEnsemble, beamsplitter, loss_fold, source_state)
from .params import ChainConfig, SystemParams, bb84_rate

Pattern = tuple[int, int, int, int]

#: Accepted BSM coincidences on detectors (b1, b2, c1, c2) and the Bell sign each heralds.
ACCEPTED_PATTERNS: Mapping[Pattern, int] = {
    (1, 1, 0, 0): +1,
    (0, 0, 1, 1): +1,
    (1, 0, 0, 1): -1,
    (0, 1, 1, 0): -1,
}

ALL_PATTERNS: tuple[Pattern, ...] = tuple(itertools.product((0, 1), repeat=4))


def qubit_basis(max_photons: int) -> tuple[Occupation, ...]:
    """Two-mode occupations with at most ``max_photons`` photons in total."""
    return tuple((n1, n - n1) for n in range(max_photons + 1) for n1 in range(n, -1, -1))


def _dual(o1: Occupation, o2: Occupation) -> Occupation:
    return tuple(o1) + tuple(o2)


@dataclass(frozen=True)
class LinkDensity:
    """Normalized two-qubit state as a density tensor over ``basis`` x ``basis``."""

    rho: np.ndarray
    basis: tuple[Occupation, ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def trace(self) -> float:
        q = self.dim
        return float(np.real(np.trace(self.rho.reshape(q * q, q * q))))

    def matrix(self) -> np.ndarray:
        q = self.dim
        return self.rho.reshape(q * q, q * q)

    @classmethod
    def from_vector(cls, state: FockVector, basis: Sequence[Occupation]) -> "LinkDensity":
        psi = _vector_to_array(state, basis)
        return cls(np.einsum("ab,AB->abAB", psi, psi.conj()), tuple(basis))

    @classmethod
    def from_ensemble(cls, ensemble: PureEnsemble, basis: Sequence[Occupation]) -> "LinkDensity":
        q = len(basis)
        rho = np.zeros((q, q, q, q), dtype=complex)
        for w, vec in ensemble.branches:
            psi = _vector_to_array(vec, basis)
            rho += w * np.einsum("ab,AB->abAB", psi, psi.conj())
        return cls(rho, tuple(basis))

    def to_ensemble(self, cutoff: int) -> PureEnsemble:
        """Spectral decomposition; eigenvalues at or below the prune threshold are dropped."""
        q = self.dim
        mat = self.matrix()
        vals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
        branches = []
        lost = 0.0
        for val, vec in zip(vals, vecs.T):
            if val <= PRUNE_THRESHOLD:
                lost += abs(val)
                continue
            psi = vec.reshape(q, q)
            amps = {_dual(self.basis[i], self.basis[j]): psi[i, j]
                    for i in range(q) for j in range(q) if abs(psi[i, j]) > 1e-17}
            branches.append((float(val), FockVector(4, cutoff, amps).normalized()))
        if lost > MAX_DISCARDED_MASS:
            raise ArithmeticError(f"spectral pruning discarded weight {lost:.3g}")
        return PureEnsemble(tuple(branches), lost)


def _vector_to_array(state: FockVector, basis: Sequence[Occupation]) -> np.ndarray:
    if state.mode_count != 4:
        raise ValueError("two-qubit states need exactly four modes")
    index = {occ: k for k, occ in enumerate(basis)}
    psi = np.zeros((len(basis), len(basis)), dtype=complex)
    for occ, amp in state:
        try:
            psi[index[occ[:2]], index[occ[2:]]] = amp
        except KeyError:
            raise CutoffOverflowError(f"occupation {occ} lies outside the qubit basis") from None
    return psi


def basis_for(*states: FockVector | PureEnsemble) -> tuple[Occupation, ...]:
    """Smallest :func:`qubit_basis` holding every qubit occupation present."""
    top = 0
    for st in states:
        vecs = [v for _, v in st.branches] if isinstance(st, PureEnsemble) else [st]
        for v in vecs:
            for occ, _ in v:
                top = max(top, occ[0] + occ[1], occ[2] + occ[3])
    return qubit_basis(top)


@functools.lru_cache(maxsize=64)
def _bsm_amplitudes(basis: tuple[Occupation, ...], cutoff: int) -> tuple[tuple[Occupation, ...], np.ndarray]:
    """``V[n, b, c]``: amplitude of detector occupation ``n`` for inner-qubit inputs ``b``, ``c``."""
    q = len(basis)
    outputs: dict[Occupation, int] = {}
    entries = []
    for i, b in enumerate(basis):
        for j, c in enumerate(basis):
            vec = FockVector.basis(_dual(b, c), cutoff)
            vec = beamsplitter(beamsplitter(vec, 0, 2), 1, 3)
            for occ, amp in vec:
                k = outputs.setdefault(occ, len(outputs))
                entries.append((k, i, j, amp))
    v = np.zeros((len(outputs), q, q), dtype=complex)
    for k, i, j, amp in entries:
        v[k, i, j] += amp
    order = tuple(sorted(outputs, key=outputs.get))
    return order, v


def _pattern_weights(occupations: Sequence[Occupation], pattern: Sequence[int], detector: DetectorModel
                     ) -> np.ndarray:
    return np.array([math.prod(detector.coeff(bool(k), n) for k, n in zip(pattern, occ))
                     for occ in occupations])


@functools.lru_cache(maxsize=256)
def _bsm_kernels(basis: tuple[Occupation, ...], cutoff: int, detector: DetectorModel
                 ) -> dict[Pattern, np.ndarray]:
    occs, v = _bsm_amplitudes(basis, cutoff)
    return {pat: np.einsum("n,nbc,nBC->bcBC", _pattern_weights(occs, pat, detector), v, v.conj())
            for pat in ACCEPTED_PATTERNS}


def _z_phase(basis: Sequence[Occupation]) -> np.ndarray:
    return np.array([(-1.0) ** occ[1] for occ in basis])


def required_cutoff(basis: Sequence[Occupation]) -> int:
    """Largest photon number one detector mode can receive in a Bell measurement."""
    return 2 * max(max(occ) for occ in basis)


@dataclass(frozen=True)
class DensityBsm:
    success_prob: float
    state: LinkDensity | None
    pattern_probs: Mapping[Pattern, float]


def bsm_density(left: LinkDensity, right: LinkDensity, detector: DetectorModel, cutoff: int) -> DensityBsm:
    """Bell measurement on ``left``'s right qubit and ``right``'s left qubit.

    Minus-sign coincidences are relabeled by a parity flip on the right-end
    qubit's second mode, so the heralded state is always in the |M+> frame.
    """
    if left.basis != right.basis:
        raise ValueError("links must share a qubit basis")
    basis = left.basis
    if required_cutoff(basis) > cutoff:
        raise CutoffOverflowError(
            f"a Bell measurement on this basis can put {required_cutoff(basis)} photons in one mode; "
            f"cutoff is {cutoff}")
    kernels = _bsm_kernels(basis, cutoff, detector)
    z = _z_phase(basis)
    out = np.zeros_like(left.rho)
    probs = {}
    q = len(basis)
    for pat, sign in ACCEPTED_PATTERNS.items():
        part = np.einsum("bcBC,abAB,cdCD->adAD", kernels[pat], left.rho, right.rho, optimize=True)
        if sign < 0:
            part = part * z[None, :, None, None] * z[None, None, None, :]
        probs[pat] = float(np.real(np.trace(part.reshape(q * q, q * q))))
        out += part
    total = float(sum(probs.values()))
    if total <= 0.0:
        return DensityBsm(0.0, None, probs)
    return DensityBsm(min(total, 1.0), LinkDensity(out / total, basis), probs)


@dataclass(frozen=True)
class BsmOutcome:
    success_prob: float
    post_state: PureEnsemble
    bell_sign: Mapping[Pattern, int]
    pattern_probs: Mapping[Pattern, float]


def bsm(left: PureEnsemble, right: PureEnsemble, detector: DetectorModel, cutoff: int | None = None
        ) -> BsmOutcome:
    """Bell measurement between two four-mode link ensembles (modes a1, a2, b1, b2)."""
    basis = basis_for(left, right)
    if cutoff is None:
        cutoff = max(left.branches[0][1].cutoff if left.branches else 0,
                     right.branches[0][1].cutoff if right.branches else 0)
    res = bsm_density(LinkDensity.from_ensemble(left, basis), LinkDensity.from_ensemble(right, basis),
                      detector, cutoff)
    post = PureEnsemble() if res.state is None else res.state.to_ensemble(cutoff)
    return BsmOutcome(res.success_prob, post, dict(ACCEPTED_PATTERNS), res.pattern_probs)


@functools.lru_cache(maxsize=64)
def _rotation(basis: tuple[Occupation, ...]) -> np.ndarray:
    """50-50 beamsplitter within one party's mode pair, as a matrix on the qubit basis."""
    q = len(basis)
    index = {occ: k for k, occ in enumerate(basis)}
    cutoff = max(sum(o) for o in basis)
    w = np.zeros((q, q), dtype=complex)
    for j, occ in enumerate(basis):
        for out, amp in beamsplitter(FockVector.basis(occ, cutoff), 0, 1):
            w[index[out], j] += amp
    return w


def ab_measure(state: LinkDensity, detector: DetectorModel, rotated: bool = False) -> dict[Pattern, float]:
    """Exact probabilities of the 16 click patterns on (a1, a2, b1, b2)."""
    rho = state.rho
    if rotated:
        w = _rotation(state.basis)
        rho = np.einsum("xa,yb,abAB,XA,YB->xyXY", w, w, rho, w.conj(), w.conj(), optimize=True)
    diag = np.real(np.einsum("abab->ab", rho))
    out = {}
    for pat in ALL_PATTERNS:
        fa = np.array([detector.coeff(bool(pat[0]), o[0]) * detector.coeff(bool(pat[1]), o[1])
                       for o in state.basis])
        fb = np.array([detector.coeff(bool(pat[2]), o[0]) * detector.coeff(bool(pat[3]), o[1])
                       for o in state.basis])
        out[pat] = float(fa @ diag @ fb)
    return out


#: How a party treats a click on both of its detectors: a uniformly random
#: bit ("random", the convention of the closed-form sift probability) or a
#: discarded round ("discard").
DOUBLE_CLICK_RULES = ("random", "discard")


def _check_rule(rule: str) -> None:
    if rule not in DOUBLE_CLICK_RULES:
        raise ValueError(f"double_click must be one of {DOUBLE_CLICK_RULES}, got {rule!r}")


def _alice_bit(k1: int, k2: int, rule: str) -> float | None:
    table = {(0, 1): 0.0, (1, 0): 1.0}
    if rule == "random":
        table[(1, 1)] = 0.5
    return table.get((k1, k2))


def _bob_bit(k1: int, k2: int, rotated: bool, rule: str) -> float | None:
    # Occupations of |M+> are anti-correlated in the computational basis and
    # correlated after the rotation, hence the mirrored rule.
    table = {(0, 1): 0.0, (1, 0): 1.0} if rotated else {(0, 1): 1.0, (1, 0): 0.0}
    if rule == "random":
        table[(1, 1)] = 0.5
    return table.get((k1, k2))


@dataclass(frozen=True)
class SiftStatistics:
    p_sift: float
    p_error: float

    @property
    def qber(self) -> float:
        return self.p_error / self.p_sift if self.p_sift > 0 else 0.5


def qber_from_patterns(probs: Mapping[Pattern, float], rotated: bool = False,
                       double_click: str = "random") -> SiftStatistics:
    """Sift and bit-error probabilities of the 16 end-station click patterns."""
    _check_rule(double_click)
    p_sift = p_err = 0.0
    for pat, p in probs.items():
        a = _alice_bit(pat[0], pat[1], double_click)
        b = _bob_bit(pat[2], pat[3], rotated, double_click)
        if a is None or b is None:
            continue
        p_sift += p
        p_err += p * (0.5 if 0.5 in (a, b) else float(a != b))
    return SiftStatistics(p_sift, p_err)


_PSI = {"psi0": (0, 1, 0, 1), "psi1": (0, 1, 1, 0), "psi2": (1, 0, 0, 1), "psi3": (1, 0, 1, 0)}


def bell_diagonal_weights(state: LinkDensity, tol: float = 1e-12) -> LinkStateCoeffs | None:
    """Normalized ``(a, b, c, d)`` when the state lives in the one-photon-per-qubit sector."""
    index = {occ: k for k, occ in enumerate(state.basis)}
    try:
        ids = {name: (index[occ[:2]], index[occ[2:]]) for name, occ in _PSI.items()}
    except KeyError:
        return None
    rho = state.rho
    diag = {name: float(np.real(rho[i, j, i, j])) for name, (i, j) in ids.items()}
    if abs(sum(diag.values()) - state.trace) > tol:
        return None
    (i1, j1), (i2, j2) = ids["psi1"], ids["psi2"]
    coh = float(np.real(rho[i2, j2, i1, j1]))
    a = 0.5 * (diag["psi1"] + diag["psi2"]) + coh
    b = 0.5 * (diag["psi1"] + diag["psi2"]) - coh
    c = 0.5 * (diag["psi0"] + diag["psi3"])
    d = 0.5 * (diag["psi1"] + diag["psi2"]) - 0.5 * (a + b)
    clip = lambda x: 0.0 if abs(x) < tol else x
    return LinkStateCoeffs(clip(a), clip(b), clip(c), clip(d))


@dataclass(frozen=True)
class ChainSimulation:
    q: float
    q_rotated: float
    p_succ: float
    p_sift: float
    rate: float
    p_link: float
    state: LinkDensity
    level_qbers: tuple[float, ...] = ()
    level_success: tuple[float, ...] = ()
    swap_success: tuple[float, ...] = field(default=())

    def to_dict(self) -> dict:
        coeffs = bell_diagonal_weights(self.state)
        return {
            "qber": self.q,
            "qber_rotated": self.q_rotated,
            "p_succ": self.p_succ,
            "p_sift": self.p_sift,
            "p_link": self.p_link,
            "rate_bits_per_s": self.rate,
            "level_qbers": list(self.level_qbers),
            "level_success": list(self.level_success),
            "swap_success": list(self.swap_success),
            "state_coeffs": None if coeffs is None else
            {"a": coeffs.a, "b": coeffs.b, "c": coeffs.c, "d": coeffs.d},
        }


def default_cutoff(p2: float) -> int:
    return 4 if p2 > 0 else 2


def end_qber(params: SystemParams, state: LinkDensity, rotated: bool = False,
             double_click: str = "random") -> SiftStatistics:
    end = DetectorModel(params.p_dark_d, params.eta_d)
    return qber_from_patterns(ab_measure(state, end, rotated), rotated, double_click)


def elementary_link(params: SystemParams, chain: ChainConfig, cutoff: int | None = None,
                    two_pair_terms: Mapping[Occupation, complex] | None = None) -> tuple[float, LinkDensity]:
    """Single-mode herald probability and heralded state of one elementary link."""
    cutoff = default_cutoff(params.p2) if cutoff is None else cutoff
    src = source_state(params.p1, params.p2, cutoff, two_pair_terms)
    basis = qubit_basis(2 if params.p2 > 0 else 1)
    rho_src = LinkDensity.from_vector(src, basis)
    center = loss_fold(DetectorModel(params.p_dark_e, params.eta_e),
                       chain.half_link_transmittance(params.alpha_db_per_km))
    res = bsm_density(rho_src, rho_src, center, cutoff)
    if res.state is None:
        raise ArithmeticError("elementary link can never be heralded")
    return res.success_prob, res.state


def simulate_chain(params: SystemParams, chain: ChainConfig, cutoff: int | None = None,
                   two_pair_terms: Mapping[Occupation, complex] | None = None,
                   double_click: str = "random") -> ChainSimulation:
    """Build the chain (level by level for N = 2^n, left to right otherwise) and measure the ends."""
    _check_rule(double_click)
    cutoff = default_cutoff(params.p2) if cutoff is None else cutoff
    p_single, rho = elementary_link(params, chain, cutoff, two_pair_terms)
    p_link = -math.expm1(params.m_modes * math.log1p(-p_single)) if p_single < 1 else 1.0
    rep = loss_fold(DetectorModel(params.p_dark_r, params.eta_r), params.lambda_m)
    n = chain.n_links
    log_succ = n * math.log(p_link)
    swaps: list[float] = []
    level_q = [end_qber(params, rho, double_click=double_click).qber]
    level_p = [p_link]
    if chain.levels is not None:
        for level in range(1, chain.levels):
            res = bsm_density(rho, rho, rep, cutoff)
            if res.state is None:
                raise ArithmeticError("repeater swap can never succeed")
            rho = res.state
            swaps.append(res.success_prob)
            level_p.append(res.success_prob)
            level_q.append(end_qber(params, rho, double_click=double_click).qber)
            log_succ += (n >> level) * math.log(res.success_prob)
    else:
        elem = rho
        for _ in range(n - 1):
            res = bsm_density(rho, elem, rep, cutoff)
            if res.state is None:
                raise ArithmeticError("repeater swap can never succeed")
            rho = res.state
            swaps.append(res.success_prob)
            log_succ += math.log(res.success_prob)
        level_q = [level_q[0]]
    comp = end_qber(params, rho, double_click=double_click)
    rot = end_qber(params, rho, rotated=True, double_click=double_click)
    p_succ = math.exp(log_succ)
    rate = comp.p_sift * p_succ * bb84_rate(comp.qber) / (2.0 * params.t_q_seconds)
    return ChainSimulation(q=comp.qber, q_rotated=rot.qber, p_succ=p_succ, p_sift=comp.p_sift, rate=rate,
                           p_link=p_link, state=rho, level_qbers=tuple(level_q),
                           level_success=tuple(level_p), swap_success=tuple(swaps))


def state_dump(sim: ChainSimulation) -> str:
    """JSON list of weighted branches ``(occupation, re, im)`` for diffing across implementations."""
    cutoff = max(max(o) for o in sim.state.basis)
    return json.dumps(sim.state.to_ensemble(max(cutoff, 1)).to_json(), sort_keys=True)
