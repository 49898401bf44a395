"""Uniform tensor grids on an interval or axis-aligned rectangle.

Node ordering everywhere is row-major with x fastest: node ``(i, j)`` has flat
index ``j * (nx + 1) + i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

BOUNDARY = 0
INTERIOR = 1

# relative slack when comparing node coordinates to the subdomain bounds
_COORD_TOL = 1e-9


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    dim: int
    bounds: tuple  # ((lo, hi), ...) per axis
    n: tuple  # cells per axis

    @property
    def h(self) -> tuple:
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.bounds, self.n))

    @property
    def lengths(self) -> tuple:
        return tuple(hi - lo for lo, hi in self.bounds)

    @property
    def shape(self) -> tuple:
        """Array shape of nodal data, ``(ny+1, nx+1)`` in 2D."""
        return tuple(n + 1 for n in reversed(self.n))

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    def axis_coords(self, axis: int) -> np.ndarray:
        lo = self.bounds[axis][0]
        return lo + np.arange(self.n[axis] + 1) * self.h[axis]

    def coords(self) -> tuple:
        """Coordinate arrays of every node, each shaped like ``self.shape``."""
        axes = [self.axis_coords(k) for k in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
        return (X, Y)

    def flat_coords(self) -> np.ndarray:
        """``(num_nodes, dim)`` node coordinates in canonical order."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def half_node_coords(self, axis: int) -> tuple:
        """Midpoints between consecutive nodes along ``axis`` (flux sample points)."""
        c = list(self.coords())
        ax = self.dim - 1 - axis  # array axis for this coordinate
        sl_lo = [slice(None)] * self.dim
        sl_hi = [slice(None)] * self.dim
        sl_lo[ax] = slice(0, -1)
        sl_hi[ax] = slice(1, None)
        out = []
        for k, arr in enumerate(c):
            if k == axis:
                out.append(0.5 * (arr[tuple(sl_lo)] + arr[tuple(sl_hi)]))
            else:
                out.append(arr[tuple(sl_lo)])
        return tuple(out)

    def node_class(self) -> np.ndarray:
        """Per-node tag, BOUNDARY or INTERIOR, shaped like ``self.shape``."""
        tags = np.full(self.shape, INTERIOR, dtype=np.int8)
        if self.dim == 1:
            tags[[0, -1]] = BOUNDARY
        else:
            tags[[0, -1], :] = BOUNDARY
            tags[:, [0, -1]] = BOUNDARY
        return tags

    def interior(self) -> np.ndarray:
        return self.node_class() == INTERIOR

    def refine(self, factor: int = 2) -> "Grid":
        return build_grid(self.dim, self.bounds, tuple(factor * n for n in self.n))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "bounds": [list(b) for b in self.bounds], "n": list(self.n)}


def build_grid(dim: int, bounds: Sequence, n) -> Grid:
    """Build a uniform grid with ``n[i]`` cells on axis ``i``.

    ``bounds`` may be a single ``(lo, hi)`` pair (reused for every axis) and
    ``n`` a single integer.
    """
    if dim not in (1, 2):
        raise GridError(f"dim must be 1 or 2, got {dim}")
    bounds = list(bounds)
    if len(bounds) == 2 and np.isscalar(bounds[0]):
        bounds = [bounds] * dim
    if len(bounds) != dim:
        raise GridError(f"expected {dim} axis bounds, got {len(bounds)}")
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    if np.isscalar(n):
        n = (int(n),) * dim
    n = tuple(int(k) for k in n)
    if len(n) != dim:
        raise GridError(f"expected {dim} cell counts, got {len(n)}")
    for axis, ((lo, hi), k) in enumerate(zip(bounds, n)):
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise GridError(f"degenerate bounds [{lo}, {hi}] on axis {axis}")
        if k < 4:
            raise GridError(f"need at least 4 cells per axis, got {k} on axis {axis}")
    return Grid(dim, bounds, n)


@dataclass(frozen=True, eq=False)
class InnerMask:
    """Nodes in the closure of the compactly contained subdomain."""

    mask: np.ndarray  # bool, shaped like grid.shape
    margin: float
    shrink: float

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def flat_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask.ravel())

    @property
    def box_shape(self) -> tuple:
        """Shape of the rectangular block of masked nodes (array order)."""
        idx = np.nonzero(self.mask)
        return tuple(int(i.max() - i.min() + 1) for i in idx)


def build_inner_mask(grid: Grid, shrink: float) -> InnerMask:
    """Select nodes with ``lo + shrink*L <= x <= hi - shrink*L`` on every axis.

    The subdomain must stay at least one cell away from the boundary so every
    masked node is interior and has a full central-difference stencil.
    """
    if not 0.0 < shrink < 0.5:
        raise GridError(f"shrink must lie in (0, 0.5), got {shrink}")
    sel = []
    for axis in range(grid.dim):
        (lo, hi), L, h = grid.bounds[axis], grid.lengths[axis], grid.h[axis]
        gap = shrink * L
        tol = _COORD_TOL * h
        if gap < h - tol:
            raise GridError(
                f"shrink {shrink} leaves a separation {gap:g} below one cell ({h:g}) on axis {axis}"
            )
        x = grid.axis_coords(axis)
        sel.append((x >= lo + gap - tol) & (x <= hi - gap + tol))
    if grid.dim == 1:
        mask = sel[0]
    else:
        mask = sel[1][:, None] & sel[0][None, :]
    if not mask.any():
        raise GridError("inner mask is empty")
    mask &= grid.interior()
    margin = min(shrink * L for L in grid.lengths)
    return InnerMask(mask, margin, shrink)
