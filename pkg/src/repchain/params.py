"""System parameters, unit conversions and shared numeric helpers.

All losses enter as dB (fiber loss per km, memory loss) and are converted to
linear transmittances once; everything downstream works in linear units.
"""
from __future__ import annotations

import dataclasses
import functools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from scipy import optimize


class ConfigError(ValueError):
    """Invalid parameter value or malformed config document."""


def db_to_linear(x_db: float) -> float:
    """Convert a loss in dB to a transmittance, ``10**(-x_db/10)``."""
    if not math.isfinite(x_db):
        raise ConfigError(f"loss must be finite, got {x_db!r}")
    return 10.0 ** (-x_db / 10.0)


def linear_to_db(x: float) -> float:
    """Inverse of :func:`db_to_linear`."""
    if not x > 0:
        raise ConfigError(f"transmittance must be positive, got {x!r}")
    return -10.0 * math.log10(x)


def binary_entropy(x: float) -> float:
    """Binary entropy in bits with the convention ``0 log 0 = 0``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def shannon_entropy(probs: Sequence[float]) -> float:
    """Shannon entropy (bits) of a probability vector; zero entries are skipped."""
    total = 0.0
    for p in probs:
        if p < 0.0:
            raise ValueError(f"negative probability {p!r}")
        if p > 0.0:
            total -= p * math.log2(p)
    return total


def bb84_rate(q: float) -> float:
    """Asymptotic BB84 key fraction per sifted symbol, ``1 - 2 h2(q)``, floored at 0."""
    q = min(max(q, 0.0), 1.0)
    return max(1.0 - 2.0 * binary_entropy(q), 0.0)


@functools.lru_cache(maxsize=None)
def solve_q_threshold() -> float:
    """QBER at which ``h2(Q) = 1/2``, i.e. where the BB84 key fraction vanishes.

    Solved by bisection on ``[1e-9, 0.5]`` where ``h2`` is increasing.
    """
    return optimize.bisect(lambda q: binary_entropy(q) - 0.5, 1e-9, 0.5, xtol=1e-16, maxiter=200)


def _check_prob(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")


def _check_efficiency(name: str, value: float) -> None:
    if not (0.0 < value <= 1.0):
        raise ConfigError(f"{name} must lie in (0, 1], got {value!r}")


@dataclass(frozen=True)
class SystemParams:
    """Device loss/noise parameters of the repeater chain.

    Efficiencies are dimensionless in (0, 1]; dark-click probabilities are per
    frequency mode and time bin. ``lambda_m`` is the linear memory
    load/readout efficiency (use :meth:`from_mapping` with ``lambda_m_db`` to
    supply it in dB).
    """

    eta_e: float
    eta_r: float
    eta_d: float
    p_dark_e: float
    p_dark_r: float
    p_dark_d: float
    lambda_m: float
    alpha_db_per_km: float
    m_modes: int
    t_q_seconds: float
    p1: float = 1.0
    p2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("eta_e", "eta_r", "eta_d", "lambda_m"):
            _check_efficiency(name, getattr(self, name))
        for name in ("p_dark_e", "p_dark_r", "p_dark_d"):
            value = getattr(self, name)
            if not (0.0 <= value < 1.0):
                raise ConfigError(f"{name} must lie in [0, 1), got {value!r}")
        if not (self.alpha_db_per_km > 0 and math.isfinite(self.alpha_db_per_km)):
            raise ConfigError(f"alpha_db_per_km must be positive, got {self.alpha_db_per_km!r}")
        if isinstance(self.m_modes, bool) or int(self.m_modes) != self.m_modes or self.m_modes < 1:
            raise ConfigError(f"m_modes must be an integer >= 1, got {self.m_modes!r}")
        object.__setattr__(self, "m_modes", int(self.m_modes))
        if not (self.t_q_seconds > 0 and math.isfinite(self.t_q_seconds)):
            raise ConfigError(f"t_q_seconds must be positive, got {self.t_q_seconds!r}")
        _check_prob("p1", self.p1)
        _check_prob("p2", self.p2)
        if self.p1 + self.p2 > 1.0 + 1e-15:
            raise ConfigError(f"p1 + p2 must not exceed 1, got {self.p1 + self.p2!r}")

    @property
    def lambda_m_db(self) -> float:
        return linear_to_db(self.lambda_m)

    def replace(self, **changes: Any) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def with_dark_counts(self, p: float) -> "SystemParams":
        """Same device set with every dark-click probability set to ``p``."""
        return self.replace(p_dark_e=p, p_dark_r=p, p_dark_d=p)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def resolved(self) -> dict[str, Any]:
        """Parameter echo with both the linear and dB form of the memory loss."""
        out = self.to_dict()
        out["lambda_m_db"] = self.lambda_m_db
        return out

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SystemParams":
        """Build from a flat key-value mapping; unknown keys are rejected."""
        data = dict(data)
        if "lambda_m_db" in data:
            if "lambda_m" in data:
                raise ConfigError("give either lambda_m or lambda_m_db, not both")
            data["lambda_m"] = db_to_linear(float(data.pop("lambda_m_db")))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(f.name for f in dataclasses.fields(cls)
                         if f.default is dataclasses.MISSING and f.name not in data)
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        for key, value in data.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a number, got {value!r}")
        return cls(**data)


@dataclass(frozen=True)
class ChainConfig:
    """Alice-to-Bob distance and the number of equal-length elementary links."""

    total_range_km: float
    n_links: int

    def __post_init__(self) -> None:
        if not (self.total_range_km >= 0 and math.isfinite(self.total_range_km)):
            raise ConfigError(f"total_range_km must be finite and >= 0, got {self.total_range_km!r}")
        if isinstance(self.n_links, bool) or int(self.n_links) != self.n_links or self.n_links < 1:
            raise ConfigError(f"n_links must be an integer >= 1, got {self.n_links!r}")
        object.__setattr__(self, "n_links", int(self.n_links))

    @property
    def elementary_length_km(self) -> float:
        return self.total_range_km / self.n_links

    def half_link_transmittance(self, alpha_db_per_km: float) -> float:
        """Transmittance over half an elementary link."""
        return db_to_linear(alpha_db_per_km * self.total_range_km / (2 * self.n_links))

    def transmittance(self, alpha_db_per_km: float) -> float:
        """End-to-end fiber transmittance."""
        return db_to_linear(alpha_db_per_km * self.total_range_km)

    @property
    def levels(self) -> int | None:
        """``n + 1`` when ``n_links == 2**n``, else None."""
        n = self.n_links.bit_length() - 1
        return n + 1 if 1 << n == self.n_links else None


# Named parameter sets used throughout the figures.
FIG4 = SystemParams(
    eta_e=0.9, eta_r=0.9, eta_d=0.9,
    p_dark_e=3e-5, p_dark_r=3e-5, p_dark_d=3e-5,
    lambda_m=db_to_linear(1.0), alpha_db_per_km=0.15,
    m_modes=1000, t_q_seconds=50e-9,
)
# Range tables compare QKD and distillation with noiseless end detectors.
SEC2C = FIG4.replace(p_dark_d=0.0)
FIG8 = FIG4.with_dark_counts(1e-6).replace(p1=0.9)

PRESETS: dict[str, SystemParams] = {"fig4": FIG4, "fig8": FIG8, "sec2c": SEC2C}


def load_config(path: str | Path) -> SystemParams:
    """Read a JSON document of flat parameter keys."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return SystemParams.from_mapping(data)
