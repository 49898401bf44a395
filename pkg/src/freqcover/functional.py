"""Gradients of solved fields and the constraint field theta = u1 * det[u; grad u]."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .grid import Grid, InnerMask
from .solver import ComplexField


class BundleError(ValueError):
    pass


def gradient(field: ComplexField, grid: Grid) -> np.ndarray:
    """Central-difference gradient, shape ``(dim, *grid.shape)``.

    Boundary nodes hold NaN: they are never read because the inner subdomain
    stays at least one cell inside the boundary.
    """
    u = np.asarray(field.values)
    out = np.full((grid.dim,) + u.shape, np.nan + 0j, dtype=complex)
    interior = grid.interior()
    for axis in range(grid.dim):
        ax = grid.dim - 1 - axis
        n = u.shape[ax]
        d = np.full(u.shape, np.nan + 0j, dtype=complex)
        centre = [slice(None)] * grid.dim
        plus = [slice(None)] * grid.dim
        minus = [slice(None)] * grid.dim
        centre[ax], plus[ax], minus[ax] = slice(1, n - 1), slice(2, n), slice(0, n - 2)
        d[tuple(centre)] = (u[tuple(plus)] - u[tuple(minus)]) / (2.0 * grid.h[axis])
        out[axis] = np.where(interior, d, np.nan)
    return out


@dataclass(eq=False)
class SolutionBundle:
    fields: list
    gradients: list
    grid: Grid
    omega: float

    @property
    def size(self) -> int:
        return len(self.fields)


def make_bundle(fields: Sequence[ComplexField]) -> SolutionBundle:
    """Group the d+1 solutions for one frequency, in boundary-condition order."""
    if not fields:
        raise BundleError("empty bundle")
    grid = fields[0].grid
    omega = fields[0].omega
    for f in fields[1:]:
        if f.grid is not grid or f.omega != omega:
            raise BundleError("all fields in a bundle must share one grid and one frequency")
    return SolutionBundle(list(fields), [gradient(f, grid) for f in fields], grid, omega)


@dataclass(eq=False)
class ConstraintField:
    """theta on the inner nodes (flat canonical order); ``scale`` is its sup there."""

    values: np.ndarray
    omega: float
    scale: float
    mask: InnerMask
    grid: Grid

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def with_scale(self, scale: float) -> "ConstraintField":
        return replace(self, scale=float(scale))

    def coords(self) -> np.ndarray:
        return self.grid.flat_coords()[self.mask.flat_indices]


def _det(M: np.ndarray) -> np.ndarray:
    """Cofactor determinant of a stack of 2x2 or 3x3 matrices, shape ``(k, k, P)``."""
    k = M.shape[0]
    if k == 2:
        return M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if k == 3:
        return (
            M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
            - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
            + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0])
        )
    raise BundleError(f"determinant only for 2x2 or 3x3, got {k}x{k}")


def constraint_F(bundle: SolutionBundle, mask: InnerMask) -> ConstraintField:
    """theta(x) = u1(x) det[[u1 .. u_{d+1}], [grad u1 .. grad u_{d+1}]] on the inner nodes."""
    grid = bundle.grid
    if bundle.size != grid.dim + 1:
        raise BundleError(f"a {grid.dim}-D grid needs {grid.dim + 1} fields, got {bundle.size}")
    idx = mask.flat_indices
    k = bundle.size
    M = np.empty((k, k, idx.size), dtype=complex)
    for col, (f, g) in enumerate(zip(bundle.fields, bundle.gradients)):
        M[0, col] = f.values.ravel()[idx]
        for axis in range(grid.dim):
            M[1 + axis, col] = g[axis].ravel()[idx]
    theta = M[0, 0] * _det(M)
    scale = float(np.max(np.abs(theta))) if theta.size else 0.0
    return ConstraintField(theta, bundle.omega, scale, mask, grid)
