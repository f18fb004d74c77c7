"""Sparse multi-mode Fock states, linear optics, and on/off detector POVMs.

States are sparse maps from occupation tuples to complex amplitudes. Mixed
states are weighted lists of pure states. Every measurement in the repeater
architecture is diagonal in photon number, so a Lüders update of a pure state
conditioned on the measured mode's occupation stays pure.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

Occupation = tuple[int, ...]

#: Branches lighter than this are dropped from ensembles.
PRUNE_THRESHOLD = 1e-15
#: Largest total weight that pruning or truncation may discard.
MAX_DISCARDED_MASS = 1e-12


class CutoffOverflowError(ArithmeticError):
    """An operation would push amplitude above the per-mode photon cutoff."""


@dataclass(frozen=True)
class FockVector:
    """Immutable sparse state vector on ``mode_count`` bosonic modes."""

    mode_count: int
    cutoff: int
    amplitudes: Mapping[Occupation, complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mode_count < 1:
            raise ValueError("mode_count must be >= 1")
        if self.cutoff < 0:
            raise ValueError("cutoff must be >= 0")
        clean: dict[Occupation, complex] = {}
        for occ, amp in self.amplitudes.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != self.mode_count:
                raise ValueError(f"occupation {occ} does not have {self.mode_count} modes")
            if min(occ) < 0:
                raise ValueError(f"negative occupation in {occ}")
            if max(occ) > self.cutoff:
                raise CutoffOverflowError(f"occupation {occ} exceeds cutoff {self.cutoff}")
            if amp != 0:
                clean[occ] = clean.get(occ, 0j) + complex(amp)
        object.__setattr__(self, "amplitudes", clean)

    @classmethod
    def basis(cls, occupation: Sequence[int], cutoff: int, amplitude: complex = 1.0) -> "FockVector":
        return cls(len(occupation), cutoff, {tuple(occupation): amplitude})

    @classmethod
    def vacuum(cls, mode_count: int, cutoff: int) -> "FockVector":
        return cls.basis((0,) * mode_count, cutoff)

    def __len__(self) -> int:
        return len(self.amplitudes)

    def __iter__(self) -> Iterator[tuple[Occupation, complex]]:
        return iter(self.amplitudes.items())

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return self.amplitudes.get(tuple(occupation), 0j)

    @property
    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalized(self) -> "FockVector":
        n2 = self.norm2
        if n2 == 0:
            raise ZeroDivisionError("cannot normalize the zero vector")
        return self.scaled(1.0 / math.sqrt(n2))

    def scaled(self, factor: complex) -> "FockVector":
        return FockVector(self.mode_count, self.cutoff, {k: v * factor for k, v in self.amplitudes.items()})

    def __add__(self, other: "FockVector") -> "FockVector":
        self._check_compatible(other)
        out = dict(self.amplitudes)
        for k, v in other.amplitudes.items():
            out[k] = out.get(k, 0j) + v
        return FockVector(self.mode_count, self.cutoff, out)

    def inner(self, other: "FockVector") -> complex:
        """``<self|other>``."""
        self._check_compatible(other)
        small, big = (self, other) if len(self) <= len(other) else (other, self)
        total = 0j
        for k in small.amplitudes:
            if k in big.amplitudes:
                total += self.amplitudes[k].conjugate() * other.amplitudes[k]
        return total

    def tensor(self, other: "FockVector") -> "FockVector":
        """Product state with ``other``'s modes appended after ours."""
        cutoff = max(self.cutoff, other.cutoff)
        return FockVector(self.mode_count + other.mode_count, cutoff,
                          {a + b: x * y for a, x in self for b, y in other})

    def with_cutoff(self, cutoff: int) -> "FockVector":
        return FockVector(self.mode_count, cutoff, self.amplitudes)

    def max_occupation(self, mode: int) -> int:
        return max((occ[mode] for occ in self.amplitudes), default=0)

    def total_photons(self) -> set[int]:
        return {sum(occ) for occ in self.amplitudes}

    def _check_compatible(self, other: "FockVector") -> None:
        if self.mode_count != other.mode_count:
            raise ValueError("mode counts differ")

    def to_json(self) -> list:
        """``[[occupation, re, im], ...]`` sorted by occupation."""
        return [[list(k), v.real, v.imag] for k, v in sorted(self.amplitudes.items())]

    @classmethod
    def from_json(cls, data: Iterable, cutoff: int) -> "FockVector":
        items = [(tuple(occ), complex(re, im)) for occ, re, im in data]
        if not items:
            raise ValueError("empty state")
        return cls(len(items[0][0]), cutoff, dict(items))


@functools.lru_cache(maxsize=4096)
def _beamsplitter_expansion(n_i: int, n_j: int, t: float) -> tuple[tuple[int, int, float], ...]:
    """Output ``(m_i, m_j, coefficient)`` for input ``|n_i, n_j>``.

    Creation operators map as ``i -> sqrt(t) i + sqrt(1-t) j`` and
    ``j -> sqrt(1-t) i - sqrt(t) j``.
    """
    st, sr = math.sqrt(t), math.sqrt(1.0 - t)
    # Polynomial in (i, j) creation operators: coefficient of i^p j^q.
    poly = {(0, 0): 1.0}
    for _ in range(n_i):
        poly = _poly_mul(poly, st, sr)
    for _ in range(n_j):
        poly = _poly_mul(poly, sr, -st)
    norm_in = math.sqrt(math.factorial(n_i) * math.factorial(n_j))
    out = []
    for (p, q), c in sorted(poly.items()):
        coeff = c * math.sqrt(math.factorial(p) * math.factorial(q)) / norm_in
        if coeff != 0.0:
            out.append((p, q, coeff))
    return tuple(out)


def _poly_mul(poly: dict, ci: float, cj: float) -> dict:
    out: dict = {}
    for (p, q), c in poly.items():
        out[(p + 1, q)] = out.get((p + 1, q), 0.0) + c * ci
        out[(p, q + 1)] = out.get((p, q + 1), 0.0) + c * cj
    return out


def beamsplitter(state: FockVector, mode_i: int, mode_j: int, transmissivity: float = 0.5) -> FockVector:
    """Apply the (self-inverse) two-mode beamsplitter with the given transmissivity."""
    if mode_i == mode_j:
        raise ValueError("beamsplitter modes must be distinct")
    for m in (mode_i, mode_j):
        if not 0 <= m < state.mode_count:
            raise IndexError(f"mode {m} out of range for {state.mode_count} modes")
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError("transmissivity must lie in [0, 1]")
    out: dict[Occupation, complex] = {}
    dropped = 0.0
    for occ, amp in state:
        for m_i, m_j, coeff in _beamsplitter_expansion(occ[mode_i], occ[mode_j], float(transmissivity)):
            new = list(occ)
            new[mode_i], new[mode_j] = m_i, m_j
            key = tuple(new)
            out[key] = out.get(key, 0j) + amp * coeff
    kept: dict[Occupation, complex] = {}
    for key, amp in out.items():
        if max(key) > state.cutoff:
            dropped += abs(amp) ** 2
        else:
            kept[key] = amp
    if dropped > MAX_DISCARDED_MASS * max(state.norm2, 1.0):
        raise CutoffOverflowError(
            f"beamsplitter on modes ({mode_i}, {mode_j}) routes weight {dropped:.3g} above cutoff {state.cutoff}")
    return FockVector(state.mode_count, state.cutoff, kept)


def phase_shift(state: FockVector, mode: int, phase: float) -> FockVector:
    """Multiply each amplitude by ``exp(i phase n_mode)``."""
    return FockVector(state.mode_count, state.cutoff,
                      {occ: amp * complex(math.cos(phase * occ[mode]), math.sin(phase * occ[mode]))
                       for occ, amp in state})


def parity_flip(state: FockVector, mode: int) -> FockVector:
    """``(-1)^n`` on one mode; on a dual-rail qubit this is a Pauli Z."""
    return FockVector(state.mode_count, state.cutoff,
                      {occ: -amp if occ[mode] % 2 else amp for occ, amp in state})


def permute_modes(state: FockVector, order: Sequence[int]) -> FockVector:
    """New mode ``k`` is old mode ``order[k]``."""
    if sorted(order) != list(range(state.mode_count)):
        raise ValueError("order must be a permutation of the modes")
    return FockVector(state.mode_count, state.cutoff,
                      {tuple(occ[m] for m in order): amp for occ, amp in state})


@dataclass(frozen=True)
class DetectorModel:
    """On/off detector with efficiency ``eta`` and dark-click probability ``p_dark``."""

    p_dark: float
    eta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_dark < 1.0:
            raise ValueError(f"p_dark must lie in [0, 1), got {self.p_dark!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta!r}")

    def click_coeff(self, n: int) -> float:
        if n == 0:
            return self.p_dark
        if self.eta >= 1.0:
            return 1.0
        # expm1/log1p keeps tiny click probabilities accurate
        return -math.expm1(math.log1p(-self.p_dark) + n * math.log1p(-self.eta))

    def noclick_coeff(self, n: int) -> float:
        return (1.0 - self.p_dark) * (1.0 - self.eta) ** n

    def coeff(self, click: bool, n: int) -> float:
        return self.click_coeff(n) if click else self.noclick_coeff(n)

    def coeffs(self, click: bool, max_n: int) -> np.ndarray:
        return np.array([self.coeff(click, n) for n in range(max_n + 1)])

    @property
    def a(self) -> float:
        return self.click_coeff(1)

    @property
    def b(self) -> float:
        return self.click_coeff(2)


def loss_fold(detector: DetectorModel, extra_transmittance: float) -> DetectorModel:
    """Absorb loss in front of the detector into its efficiency."""
    if not 0.0 < extra_transmittance <= 1.0:
        raise ValueError(f"transmittance must lie in (0, 1], got {extra_transmittance!r}")
    return DetectorModel(detector.p_dark, detector.eta * extra_transmittance)


@dataclass(frozen=True)
class PureEnsemble:
    """Unnormalized mixed state ``sum_k w_k |psi_k><psi_k|`` with normalized ``psi_k``."""

    branches: tuple[tuple[float, FockVector], ...] = ()
    discarded_weight: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "branches", tuple(self.branches))
        for w, vec in self.branches:
            if w < 0:
                raise ValueError("branch weights must be >= 0")
        if len({vec.mode_count for _, vec in self.branches}) > 1:
            raise ValueError("all branches must share a mode count")

    @classmethod
    def pure(cls, state: FockVector, weight: float = 1.0) -> "PureEnsemble":
        n2 = state.norm2
        return cls(((weight * n2, state.normalized()),)) if n2 > 0 else cls()

    @property
    def total_weight(self) -> float:
        return float(sum(w for w, _ in self.branches))

    @property
    def mode_count(self) -> int:
        if not self.branches:
            raise ValueError("empty ensemble has no mode count")
        return self.branches[0][1].mode_count

    def __len__(self) -> int:
        return len(self.branches)

    def normalized(self) -> "PureEnsemble":
        total = self.total_weight
        if total == 0:
            raise ZeroDivisionError("cannot normalize an empty ensemble")
        return PureEnsemble(tuple((w / total, v) for w, v in self.branches), self.discarded_weight / total)

    def map(self, fn) -> "PureEnsemble":
        """Apply a norm-preserving map to every branch."""
        return PureEnsemble(tuple((w, fn(v)) for w, v in self.branches), self.discarded_weight)

    def pruned(self, threshold: float = PRUNE_THRESHOLD) -> "PureEnsemble":
        keep = tuple((w, v) for w, v in self.branches if w > threshold)
        lost = self.discarded_weight + sum(w for w, _ in self.branches if w <= threshold)
        if lost > MAX_DISCARDED_MASS:
            raise ArithmeticError(f"pruning discarded weight {lost:.3g}")
        return PureEnsemble(keep, lost)

    def density_matrix(self, basis: Sequence[Occupation]) -> np.ndarray:
        """Dense density matrix over the listed occupations (others must be absent)."""
        index = {occ: k for k, occ in enumerate(basis)}
        rho = np.zeros((len(basis), len(basis)), dtype=complex)
        for w, vec in self.branches:
            psi = np.zeros(len(basis), dtype=complex)
            for occ, amp in vec:
                psi[index[occ]] = amp
            rho += w * np.outer(psi, psi.conj())
        return rho

    def to_json(self) -> list:
        return [{"weight": w, "amplitudes": v.to_json()} for w, v in self.branches]


def measure_mode(state: FockVector, mode: int, click: bool | None, detector: DetectorModel | None = None
                 ) -> PureEnsemble:
    """Lüders update for one detector outcome, removing the measured mode.

    One branch is produced per occupation ``n`` of the measured mode, with
    weight ``coeff(n) * ||P_n psi||^2``. ``click=None`` is the partial trace.
    """
    if not 0 <= mode < state.mode_count:
        raise IndexError(f"mode {mode} out of range")
    if state.mode_count < 2:
        raise ValueError("cannot remove the only mode")
    if click is not None and detector is None:
        raise ValueError("a detector is required for a click/no-click outcome")
    groups: dict[int, dict[Occupation, complex]] = {}
    for occ, amp in state:
        rest = occ[:mode] + occ[mode + 1:]
        groups.setdefault(occ[mode], {})[rest] = amp
    branches = []
    for n in sorted(groups):
        factor = 1.0 if click is None else detector.coeff(click, n)
        if factor == 0.0:
            continue
        vec = FockVector(state.mode_count - 1, state.cutoff, groups[n])
        weight = factor * vec.norm2
        if weight > 0:
            branches.append((weight, vec.normalized()))
    return PureEnsemble(tuple(branches))


def measure_ensemble(ensemble: PureEnsemble, mode: int, click: bool | None,
                     detector: DetectorModel | None = None) -> PureEnsemble:
    """:func:`measure_mode` applied to every branch, flattened."""
    branches = []
    for w, vec in ensemble.branches:
        for w2, v2 in measure_mode(vec, mode, click, detector).branches:
            branches.append((w * w2, v2))
    return PureEnsemble(tuple(branches), ensemble.discarded_weight)


def trace_mode(ensemble: PureEnsemble, mode: int) -> PureEnsemble:
    return measure_ensemble(ensemble, mode, None)


def append_vacuum_modes(state: FockVector, count: int) -> FockVector:
    return state.tensor(FockVector.vacuum(count, state.cutoff))


def explicit_loss(ensemble: PureEnsemble, mode: int, transmittance: float) -> PureEnsemble:
    """Loss modeled literally: mix the mode with a vacuum environment mode and trace it out."""
    widened = ensemble.map(lambda v: append_vacuum_modes(v, 1))
    env = widened.mode_count - 1
    mixed = widened.map(lambda v: beamsplitter(v, mode, env, transmittance))
    return trace_mode(mixed, env)


def mplus(cutoff: int = 1) -> FockVector:
    """``(|10,01> + |01,10>)/sqrt(2)`` on modes (a1, a2, b1, b2)."""
    h = 1.0 / math.sqrt(2.0)
    return FockVector(4, cutoff, {(1, 0, 0, 1): h, (0, 1, 1, 0): h})


#: Two-pair term of the default source, before the overall ``sqrt(p2)``.
DEFAULT_TWO_PAIR_TERMS: Mapping[Occupation, float] = {
    (2, 0, 0, 2): 1.0 / math.sqrt(3.0),
    (1, 1, 1, 1): -1.0 / math.sqrt(3.0),
    (0, 2, 2, 0): 1.0 / math.sqrt(3.0),
}


def source_state(p1: float, p2: float, cutoff: int = 2,
                 two_pair_terms: Mapping[Occupation, complex] | None = None) -> FockVector:
    """Pair-source output on modes (a1, a2, b1, b2): vacuum, one Bell pair, and a two-pair term.

    ``two_pair_terms`` replaces the default four-photon amplitudes; it is
    renormalized so that ``p2`` remains the two-pair probability.
    """
    if p1 < 0 or p2 < 0 or p1 + p2 > 1.0 + 1e-15:
        raise ValueError(f"need p1, p2 >= 0 and p1 + p2 <= 1, got {p1!r}, {p2!r}")
    if p2 > 0 and cutoff < 2:
        raise CutoffOverflowError("two-pair emission needs cutoff >= 2")
    if cutoff < 1:
        raise CutoffOverflowError("cutoff must be >= 1")
    amps: dict[Occupation, complex] = {}
    p0 = max(1.0 - p1 - p2, 0.0)
    if p0 > 0:
        amps[(0, 0, 0, 0)] = math.sqrt(p0)
    if p1 > 0:
        for occ, a in mplus().amplitudes.items():
            amps[occ] = a * math.sqrt(p1)
    if p2 > 0:
        terms = dict(DEFAULT_TWO_PAIR_TERMS if two_pair_terms is None else two_pair_terms)
        norm = math.sqrt(sum(abs(a) ** 2 for a in terms.values()))
        for occ, a in terms.items():
            if sum(occ) != 4:
                raise ValueError(f"two-pair term {occ} must carry four photons")
            amps[tuple(occ)] = amps.get(tuple(occ), 0j) + a / norm * math.sqrt(p2)
    return FockVector(4, cutoff, amps)


def dump_json(ensemble: PureEnsemble) -> str:
    return json.dumps(ensemble.to_json(), sort_keys=True)
