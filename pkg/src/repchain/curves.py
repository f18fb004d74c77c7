"""Tabular result sets and their CSV/JSON serialisation.

Every CSV starts with ``#`` comment lines carrying the tool version, the full
parameter set (as JSON that :meth:`SystemParams.from_mapping` accepts) and any
scalar metadata of the run. Numbers are written with 17 significant digits so
that identical inputs give byte-identical files.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .params import ConfigError, SystemParams

VERSION = "0.1.0"


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(value)


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else fmt(v)
    return value


def dumps_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class RateCurve:
    """One labelled series ``y(x)`` plus the parameters that produced it."""

    x: np.ndarray
    y: np.ndarray
    label: str
    params: SystemParams

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError(f"x and y must be 1-D with equal length, got {x.shape} and {y.shape}")
        if x.size > 1 and not np.all(np.diff(x) > 0):
            raise ValueError("x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class CurveSet:
    """Several series over a shared x grid, written as one CSV table."""

    x_name: str
    curves: tuple[RateCurve, ...]
    params: SystemParams
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.curves:
            raise ValueError("a curve set needs at least one series")
        x0 = self.curves[0].x
        for c in self.curves[1:]:
            if c.x.shape != x0.shape or not np.array_equal(c.x, x0):
                raise ValueError(f"series {c.label!r} uses a different x grid")
        labels = [c.label for c in self.curves]
        if len(set(labels)) != len(labels):
            raise ValueError("series labels must be unique")

    @classmethod
    def from_columns(cls, x_name: str, x: Sequence[float], columns: Mapping[str, Sequence[float]],
                     params: SystemParams, meta: Mapping[str, Any] | None = None) -> "CurveSet":
        curves = tuple(RateCurve(np.asarray(x, float), np.asarray(y, float), label, params)
                       for label, y in columns.items())
        return cls(x_name, curves, params, dict(meta or {}))

    @property
    def x(self) -> np.ndarray:
        return self.curves[0].x

    def column(self, label: str) -> np.ndarray:
        for c in self.curves:
            if c.label == label:
                return c.y
        raise KeyError(label)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(header_lines(self.params, self.meta))
        buf.write(",".join([self.x_name] + [c.label for c in self.curves]) + "\n")
        for k, xv in enumerate(self.x):
            buf.write(",".join([fmt(xv)] + [fmt(c.y[k]) for c in self.curves]) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return dumps_json({
            "version": VERSION,
            "params": self.params.to_dict(),
            "meta": dict(self.meta),
            self.x_name: self.x,
            "series": {c.label: c.y for c in self.curves},
        })


def header_lines(params: SystemParams, meta: Mapping[str, Any] | None = None) -> str:
    lines = [f"# repchain {VERSION}",
             "# params: " + json.dumps(_jsonable(params.to_dict()), sort_keys=True)]
    for key in sorted(meta or {}):
        lines.append(f"# {key}: " + json.dumps(_jsonable(meta[key]), sort_keys=True))
    return "\n".join(lines) + "\n"


def parse_header(text: str) -> tuple[SystemParams, dict[str, Any]]:
    """Recover the parameter set and metadata from a CSV written by :meth:`CurveSet.to_csv`."""
    params = None
    meta: dict[str, Any] = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            break
        key, sep, rest = line[2:].partition(": ")
        if not sep:
            continue
        if key == "params":
            params = SystemParams.from_mapping(json.loads(rest))
        else:
            meta[key] = json.loads(rest)
    if params is None:
        raise ConfigError("no parameter echo found in header")
    return params, meta


def table_csv(columns: Mapping[str, Sequence[Any]], params: SystemParams,
              meta: Mapping[str, Any] | None = None) -> str:
    """CSV for tables whose first column need not be increasing (e.g. the N_max table)."""
    names = list(columns)
    lengths = {len(columns[n]) for n in names}
    if len(lengths) > 1:
        raise ValueError("columns must have equal length")
    rows = zip(*(columns[n] for n in names))
    body = "".join(",".join(fmt(v) for v in row) + "\n" for row in rows)
    return header_lines(params, meta) + ",".join(names) + "\n" + body
