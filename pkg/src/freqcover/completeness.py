"""Completeness of a frequency tuple on the inner subdomain.

Each member's |theta| is measured against its own sup over the subdomain, so
rescaling one member (e.g. near a resonance) cannot hide the others. A node is
*bad* when every member satisfies ``|theta_k| <= delta * scale_k``; the tuple
is complete when no node is bad. A member with ``scale_k = 0`` counts as zero
everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .functional import ConstraintField

DEFAULT_DELTA = 1e-3


class CompletenessError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyBand:
    a_min: float
    a_max: float
    excluded: tuple = ()  # ((centre, radius), ...)

    def __post_init__(self):
        if not (self.a_min > 0 and self.a_max >= self.a_min):
            raise CompletenessError(f"invalid band [{self.a_min}, {self.a_max}]")

    @classmethod
    def from_spectrum(cls, a_min, a_max, spectrum, guard_radius: float) -> "FrequencyBand":
        omegas = getattr(spectrum, "omegas", spectrum)
        ex = tuple((float(w), float(guard_radius)) for w in omegas
                   if a_min - guard_radius <= w <= a_max + guard_radius)
        return cls(float(a_min), float(a_max), ex)

    @property
    def width(self) -> float:
        return self.a_max - self.a_min

    def excluded_at(self, omega: float) -> bool:
        return any(abs(omega - c) < r for c, r in self.excluded)

    def contains(self, omega: float) -> bool:
        return self.a_min <= omega <= self.a_max and not self.excluded_at(omega)

    def equispaced(self, M: int) -> np.ndarray:
        if M == 1:
            return np.array([self.a_min])
        k = np.arange(M)
        return self.a_min + (self.a_max - self.a_min) * k / (M - 1)

    def to_dict(self) -> dict:
        return {"a_min": self.a_min, "a_max": self.a_max, "excluded": [list(e) for e in self.excluded]}


@dataclass(eq=False)
class CompletenessReport:
    tuple: tuple
    margin_sum: float
    margin_max: float
    normalized_margin: float
    delta: float
    scales: tuple  # per-member sup |theta|
    bad_set: np.ndarray  # flat grid node indices
    # per inner node, 0-based index of the member with the largest normalised
    # |theta| (ties to the first); -1 on the bad set
    cover: np.ndarray
    complete: bool
    inner_count: int = 0

    @property
    def bad_fraction(self) -> float:
        return self.bad_set.size / self.inner_count if self.inner_count else 0.0

    def cover_histogram(self) -> list:
        valid = self.cover[self.cover >= 0]
        return np.bincount(valid, minlength=len(self.tuple)).tolist()

    def to_dict(self) -> dict:
        return {
            "tuple": [float(w) for w in self.tuple],
            "delta": self.delta,
            "margin_sum": self.margin_sum,
            "margin_max": self.margin_max,
            "normalized_margin": self.normalized_margin,
            "complete": bool(self.complete),
            "bad_set_count": int(self.bad_set.size),
            "cover_histogram": self.cover_histogram(),
        }


def _check_shared(fields: Sequence[ConstraintField]):
    if not fields:
        raise CompletenessError("empty tuple")
    ref = fields[0]
    if ref.values.size == 0:
        raise CompletenessError("empty inner mask")
    for f in fields[1:]:
        if f.grid is not ref.grid and not (
            f.grid.to_dict() == ref.grid.to_dict() and np.array_equal(f.mask.mask, ref.mask.mask)
        ):
            raise CompletenessError("constraint fields live on different grids or masks")
        if f.values.shape != ref.values.shape:
            raise CompletenessError("constraint fields have mismatched node counts")


def normalized_rows(abs_rows: np.ndarray, scales) -> np.ndarray:
    """|theta_k| / scale_k, with zero rows where the scale vanishes."""
    scales = np.asarray(scales, dtype=float)
    safe = np.where(scales > 0, scales, 1.0)
    return np.where(scales[:, None] > 0, abs_rows / safe[:, None], 0.0)


def tuple_stats(abs_rows: np.ndarray, scales, delta: float):
    """Margins and completeness from stacked |theta| rows, shape ``(K, P)``.

    Returns ``(margin_sum, margin_max, normalized_margin, complete)``; the raw
    margins use |theta| as is, the normalised margin is the min over nodes of
    the sum of per-member normalised magnitudes.
    """
    margin_max = float(abs_rows.max(axis=0).min())
    margin_sum = float(abs_rows.sum(axis=0).min())
    rel = normalized_rows(abs_rows, scales)
    normalized = float(rel.sum(axis=0).min())
    complete = bool(rel.max(axis=0).min() > delta)
    return margin_sum, margin_max, normalized, complete


def evaluate_tuple(fields: Sequence[ConstraintField], mask=None, delta: float = DEFAULT_DELTA) -> CompletenessReport:
    """Margins, bad set and argmax cover for the tuple whose members are ``fields``."""
    _check_shared(fields)
    if mask is not None and not np.array_equal(mask.mask, fields[0].mask.mask):
        raise CompletenessError("mask does not match the constraint fields")
    if not 0.0 < delta < 1.0:
        raise CompletenessError(f"delta must lie in (0, 1), got {delta}")
    rows = np.stack([f.abs for f in fields])
    scales = [f.scale for f in fields]
    margin_sum, margin_max, norm, complete = tuple_stats(rows, scales, delta)
    rel = normalized_rows(rows, scales)
    bad_local = rel.max(axis=0) <= delta
    cover = np.argmax(rel, axis=0)
    cover[bad_local] = -1
    inner = fields[0].mask.flat_indices
    return CompletenessReport(
        tuple(float(f.omega) for f in fields), margin_sum, margin_max, norm, float(delta),
        tuple(float(x) for x in scales), inner[bad_local], cover, complete, int(inner.size),
    )


@dataclass(eq=False)
class NearZeroSet:
    omega: float
    nodes: np.ndarray  # flat grid node indices, ascending
    fraction: float
    delta: float
    grid_key: tuple = field(default=(), repr=False)

    @property
    def count(self) -> int:
        return int(self.nodes.size)


def _grid_key(f: ConstraintField) -> tuple:
    g = f.grid.to_dict()
    return (g["dim"], tuple(map(tuple, g["bounds"])), tuple(g["n"]), f.mask.shrink)


def near_zero_set(field: ConstraintField, delta: float) -> NearZeroSet:
    """Inner nodes with |theta| <= delta * scale; all of them when scale is 0."""
    inner = field.mask.flat_indices
    if field.scale == 0.0:
        local = np.ones(inner.size, bool)
    else:
        # same arithmetic as evaluate_tuple so the two agree node for node
        local = field.abs / field.scale <= delta
    nodes = inner[local]
    frac = nodes.size / inner.size if inner.size else 0.0
    return NearZeroSet(field.omega, nodes, float(frac), float(delta), _grid_key(field))


def intersect_near_zero(sets: Sequence[NearZeroSet]) -> np.ndarray:
    if not sets:
        raise CompletenessError("nothing to intersect")
    key = sets[0].grid_key
    out = sets[0].nodes
    for s in sets[1:]:
        if s.grid_key != key:
            raise CompletenessError("near-zero sets come from different grids")
        out = np.intersect1d(out, s.nodes, assume_unique=True)
    return out
