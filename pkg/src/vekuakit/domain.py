"""Uniform box grids, Clifford-valued fields and the two L2 pairings."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .clifford import (
    DimensionError,
    Multivector,
    blade_name,
    conjugate_coeffs,
    geometric_product,
)


class GridMismatch(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class GridDomain:
    """Tensor grid with ``m`` points per axis on a box in R^n.

    Points are ordered C-style with axis 0 slowest.  Weights are the tensor
    trapezoid rule, so they sum to the box volume.
    """

    def __init__(self, n: int, m: int, box: Sequence[tuple[float, float]] | None = None):
        if n < 1:
            raise ValueError("n must be >= 1")
        if m < 2:
            raise ValueError("need at least two points per axis")
        if box is None:
            box = [(0.0, 1.0)] * n
        box = tuple((float(lo), float(hi)) for lo, hi in box)
        if len(box) != n:
            raise ValueError(f"box has {len(box)} axes, expected {n}")
        if any(hi <= lo for lo, hi in box):
            raise ValueError("box extents must satisfy low < high")
        self.n = n
        self.m = m
        self.box = box
        self.h = tuple((hi - lo) / (m - 1) for lo, hi in box)
        self.shape = (m,) * n
        self.size = m ** n

    @classmethod
    def cube(cls, n: int, m: int, low: float = 0.0, high: float = 1.0) -> GridDomain:
        return cls(n, m, [(low, high)] * n)

    def __repr__(self) -> str:
        return f"GridDomain(n={self.n}, m={self.m}, box={self.box})"

    def __eq__(self, other) -> bool:
        return isinstance(other, GridDomain) and (self.n, self.m, self.box) == (other.n, other.m, other.box)

    def __hash__(self):
        return hash((self.n, self.m, self.box))

    @property
    def blades(self) -> int:
        return 1 << self.n

    @property
    def ndof(self) -> int:
        """Length of a flattened field."""
        return self.size << self.n

    @cached_property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, self.m) for lo, hi in self.box]

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return _frozen(np.stack([g.ravel() for g in mesh], axis=1))

    @cached_property
    def index_grid(self) -> np.ndarray:
        """Integer lattice index of each point, shape (N, n)."""
        idx = np.indices(self.shape).reshape(self.n, -1).T
        return _frozen(idx)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.ones(self.shape)
        for axis, h in enumerate(self.h):
            w1 = np.full(self.m, h)
            w1[0] = w1[-1] = h / 2
            shape = [1] * self.n
            shape[axis] = self.m
            w = w * w1.reshape(shape)
        return _frozen(w.ravel())

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.box]))

    @property
    def diam(self) -> float:
        return math.sqrt(sum((hi - lo) ** 2 for lo, hi in self.box))

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        idx = self.index_grid
        return _frozen(np.any((idx == 0) | (idx == self.m - 1), axis=1))

    @cached_property
    def interior_mask(self) -> np.ndarray:
        return _frozen(~self.boundary_mask)

    def inner_mask(self, margin: int = 1) -> np.ndarray:
        """Points at least ``margin`` cells away from every face."""
        idx = self.index_grid
        return np.all((idx >= margin) & (idx <= self.m - 1 - margin), axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        """Unit outward normals on the boundary, zero inside.

        A corner takes the normal of the lexicographically first face it
        touches (lowest axis, low side before high side).
        """
        eta = np.zeros((self.size, self.n))
        idx = self.index_grid
        done = np.zeros(self.size, dtype=bool)
        for axis in range(self.n):
            for side, value in ((-1.0, 0), (1.0, self.m - 1)):
                hit = (idx[:, axis] == value) & ~done
                eta[hit, axis] = side
                done |= hit
        return _frozen(eta)

    def locate(self, x: Sequence[float], tol: float = 1e-9) -> int:
        """Flat index of the grid point at ``x``; raises for off-grid points."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"point must have {self.n} coordinates")
        ijk = []
        for axis, (lo, _hi) in enumerate(self.box):
            t = (x[axis] - lo) / self.h[axis]
            k = int(round(t))
            if abs(t - k) > tol or not 0 <= k < self.m:
                raise ValueError(f"point {tuple(x)} is not a grid point")
            ijk.append(k)
        return int(np.ravel_multi_index(tuple(ijk), self.shape))

    def refine(self, m: int) -> GridDomain:
        return GridDomain(self.n, m, self.box)


class Field:
    """A Clifford-valued grid function: ``values[p, A]`` is the e_A coefficient at point p."""

    __slots__ = ("grid", "values")
    __array_priority__ = 20

    def __init__(self, grid: GridDomain, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1 and values.size == grid.ndof:
            values = values.reshape(grid.size, grid.blades)
        if values.shape != (grid.size, grid.blades):
            raise DimensionError(
                f"field values must have shape {(grid.size, grid.blades)}, got {values.shape}"
            )
        self.grid = grid
        self.values = values

    # constructors
    @classmethod
    def zeros(cls, grid: GridDomain) -> Field:
        return cls(grid, np.zeros((grid.size, grid.blades)))

    @classmethod
    def scalar(cls, grid: GridDomain, values) -> Field:
        v = np.zeros((grid.size, grid.blades))
        v[:, 0] = values
        return cls(grid, v)

    @classmethod
    def constant(cls, grid: GridDomain, mv: Multivector | float) -> Field:
        if not isinstance(mv, Multivector):
            mv = Multivector.scalar(float(mv), grid.n)
        if mv.n != grid.n:
            raise DimensionError("multivector dimension does not match grid")
        return cls(grid, np.tile(mv.coeffs, (grid.size, 1)))

    @classmethod
    def vector(cls, grid: GridDomain, components: np.ndarray) -> Field:
        """Grade-1 field from an (N, n) array of components."""
        v = np.zeros((grid.size, grid.blades))
        v[:, [1 << i for i in range(grid.n)]] = components
        return cls(grid, v)

    @classmethod
    def from_flat(cls, grid: GridDomain, vec: np.ndarray) -> Field:
        return cls(grid, np.asarray(vec).reshape(grid.size, grid.blades))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def copy(self) -> Field:
        return Field(self.grid, self.values.copy())

    def _same_grid(self, other: Field) -> None:
        if other.grid != self.grid:
            raise GridMismatch("fields live on different grids")

    # algebra
    def __add__(self, other):
        if isinstance(other, Field):
            self._same_grid(other)
            return Field(self.grid, self.values + other.values)
        if isinstance(other, Multivector):
            return self + Field.constant(self.grid, other)
        return self + Field.constant(self.grid, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self) -> Field:
        return Field(self.grid, -self.values)

    def __mul__(self, other):
        """Pointwise Clifford product (Field or Multivector on the right) or real scaling."""
        if isinstance(other, Field):
            self._same_grid(other)
            return Field(self.grid, geometric_product(self.values, other.values))
        if isinstance(other, Multivector):
            if other.n != self.grid.n:
                raise DimensionError("multivector dimension does not match grid")
            return Field(self.grid, geometric_product(self.values, other.coeffs[None, :]))
        if isinstance(other, np.ndarray):
            return Field(self.grid, self.values * other.reshape(-1, 1))
        return Field(self.grid, self.values * float(other))

    def __rmul__(self, other):
        if isinstance(other, Multivector):
            if other.n != self.grid.n:
                raise DimensionError("multivector dimension does not match grid")
            return Field(self.grid, geometric_product(other.coeffs[None, :], self.values))
        if isinstance(other, np.ndarray):
            return Field(self.grid, self.values * other.reshape(-1, 1))
        return Field(self.grid, self.values * float(other))

    def __truediv__(self, other):
        if isinstance(other, np.ndarray):
            return Field(self.grid, self.values / other.reshape(-1, 1))
        return Field(self.grid, self.values / float(other))

    def conj(self) -> Field:
        return Field(self.grid, conjugate_coeffs(self.values))

    def scalar_part(self) -> np.ndarray:
        return self.values[:, 0].copy()

    def nonscalar_part(self) -> Field:
        v = self.values.copy()
        v[:, 0] = 0.0
        return Field(self.grid, v)

    def component(self, mask: int) -> np.ndarray:
        return self.values[:, mask].copy()

    def at(self, index: int) -> Multivector:
        return Multivector(self.values[index])

    def is_scalar(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.values[:, 1:]) <= atol))

    def sup_norm(self) -> float:
        """max over points of the Euclidean norm of the coefficient vector."""
        return float(np.sqrt((self.values ** 2).sum(axis=1)).max())

    def norm(self, mask: np.ndarray | None = None) -> float:
        return math.sqrt(max(scalar_product(self, self, mask=mask), 0.0))

    def masked(self, mask: np.ndarray) -> Field:
        v = np.where(mask[:, None], self.values, 0.0)
        return Field(self.grid, v)

    def __repr__(self) -> str:
        return f"Field({self.grid!r}, norm={self.norm():.4g})"


def sample(expr: Callable[[np.ndarray], object], grid: GridDomain) -> Field:
    """Evaluate ``expr`` at every grid point.

    ``expr`` maps a coordinate vector to a Multivector, a real number, or a
    length-2^n coefficient sequence.
    """
    vals = np.empty((grid.size, grid.blades))
    for p, x in enumerate(grid.points):
        out = expr(x)
        if isinstance(out, Multivector):
            if out.n != grid.n:
                raise DimensionError("expression returned a multivector of the wrong dimension")
            c = out.coeffs
        elif np.ndim(out) == 0:
            c = np.zeros(grid.blades)
            c[0] = float(out)
        else:
            c = np.asarray(out, dtype=float).reshape(-1)
            if c.size != grid.blades:
                raise DimensionError(f"expression returned {c.size} coefficients, expected {grid.blades}")
        if not np.all(np.isfinite(c)):
            raise ValueError(f"expression is not finite at point {tuple(x)}")
        vals[p] = c
    return Field(grid, vals)


def sample_vectorized(fn: Callable[[np.ndarray], np.ndarray], grid: GridDomain) -> Field:
    """Like :func:`sample` for ``fn(points) -> (N,)`` scalar or ``(N, 2^n)`` arrays."""
    out = np.asarray(fn(grid.points), dtype=float)
    if out.ndim == 1:
        return Field.scalar(grid, out) if np.all(np.isfinite(out)) else _bad(grid, out)
    if not np.all(np.isfinite(out)):
        return _bad(grid, out)
    return Field(grid, out)


def _bad(grid: GridDomain, out: np.ndarray):
    bad = np.flatnonzero(~np.all(np.isfinite(out.reshape(grid.size, -1)), axis=1))[0]
    raise ValueError(f"expression is not finite at point {tuple(grid.points[bad])}")


def scalar_product(u: Field, v: Field, mask: np.ndarray | None = None) -> float:
    """Sc of the integral of conj(u) v, i.e. sum of weight times the coefficient dot product."""
    if u.grid != v.grid:
        raise GridMismatch("fields live on different grids")
    w = u.grid.weights if mask is None else u.grid.weights * mask
    return float(w @ np.einsum("pa,pa->p", u.values, v.values))


def inner_product(u: Field, v: Field) -> Multivector:
    """Clifford-valued pairing: integral of conj(u) v."""
    if u.grid != v.grid:
        raise GridMismatch("fields live on different grids")
    prod = geometric_product(conjugate_coeffs(u.values), v.values)
    return Multivector(u.grid.weights @ prod)


def weighted_gram(fields: Sequence[Field]) -> np.ndarray:
    if not fields:
        return np.zeros((0, 0))
    grid = fields[0].grid
    X = np.stack([f.values for f in fields])  # (K, N, B)
    Xw = X * grid.weights[None, :, None]
    return np.einsum("kpa,lpa->kl", Xw, X)


# -- test functions -----------------------------------------------------------

@dataclass(frozen=True)
class TestFunctionSystem:
    """Fields vanishing on the boundary, standing in for W_0^{1,2}.

    Members are nested: the first ``k`` members of a larger system equal the
    system built with ``count=k``.
    """

    grid: GridDomain
    members: tuple[Field, ...]
    centers: tuple[int, ...]
    profile: str

    __test__ = False  # not a pytest class

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i: int) -> Field:
        return self.members[i]

    def matrix(self) -> np.ndarray:
        """Flattened members as columns."""
        return np.stack([f.flat() for f in self.members], axis=1)


def _center_order(grid: GridDomain, count: int) -> list[tuple[int, float]]:
    """Greedy farthest-point order of interior points in the max-norm.

    Returns (flat index, insertion radius) pairs; the first point is the one
    nearest the box center.
    """
    interior = np.flatnonzero(grid.interior_mask)
    idx = grid.index_grid[interior].astype(float)
    mid = (grid.m - 1) / 2.0
    first = int(np.argmin(np.abs(idx - mid).max(axis=1)))
    dist = np.abs(idx - idx[first]).max(axis=1)
    order = [(int(interior[first]), float(grid.m))]
    chosen = np.zeros(len(interior), dtype=bool)
    chosen[first] = True
    while len(order) < count:
        cand = np.where(chosen, -1.0, dist)
        k = int(np.argmax(cand))  # first maximum: lexicographic tie-break
        order.append((int(interior[k]), float(dist[k])))
        chosen[k] = True
        dist = np.minimum(dist, np.abs(idx - idx[k]).max(axis=1))
    return order


def _profile_1d(t: np.ndarray, kind: str) -> np.ndarray:
    a = np.abs(t)
    if kind == "hat":
        return np.clip(1.0 - a, 0.0, None)
    if kind == "bump":
        out = np.zeros_like(a)
        inside = a < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - a[inside] ** 2))
        return out
    raise ValueError(f"unknown profile {kind!r}")


def test_function_basis(
    grid: GridDomain,
    count: int,
    blades: Iterable[int] = (0,),
    profile: str = "hat",
) -> TestFunctionSystem:
    """Nested multiscale tensor-product hats (or bumps) times blades.

    Centers follow a farthest-point order over interior points; each member's
    half-width is its insertion radius, clipped per axis so the support stays
    inside the box.  In max-norm the support of a member never contains an
    earlier center, which keeps the system linearly independent.
    """
    blades = list(blades)
    if not blades:
        raise ValueError("need at least one blade")
    if any(not 0 <= b < grid.blades for b in blades):
        raise ValueError("blade index out of range")
    n_int = int(grid.interior_mask.sum())
    if count < 1 or count > n_int * len(blades):
        raise ValueError(f"count must be in [1, {n_int * len(blades)}], got {count}")
    n_centers = -(-count // len(blades))
    order = _center_order(grid, n_centers)
    idx = grid.index_grid
    members: list[Field] = []
    centers: list[int] = []
    for flat, radius in order:
        c = idx[flat]
        prof = np.ones(grid.size)
        for axis in range(grid.n):
            r = min(radius, c[axis], grid.m - 1 - c[axis])
            prof *= _profile_1d((idx[:, axis] - c[axis]) / r, profile)
        prof[grid.boundary_mask] = 0.0
        for b in blades:
            if len(members) == count:
                break
            v = np.zeros((grid.size, grid.blades))
            v[:, b] = prof
            members.append(Field(grid, v))
            centers.append(flat)
    return TestFunctionSystem(grid, tuple(members), tuple(centers), profile)


test_function_basis.__test__ = False


def bubble(grid: GridDomain) -> np.ndarray:
    """Smooth scalar profile prod (x_i - lo_i)(hi_i - x_i), normalized to max 1."""
    out = np.ones(grid.size)
    for axis, (lo, hi) in enumerate(grid.box):
        x = grid.points[:, axis]
        out *= 4.0 * (x - lo) * (hi - x) / (hi - lo) ** 2
    return out


# -- export -------------------------------------------------------------------

def write_field_csv(field: Field, path: str | Path) -> Path:
    path = Path(path)
    grid = field.grid
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"x{i + 1}" for i in range(grid.n)] + [blade_name(b) for b in range(grid.blades)])
        for x, v in zip(grid.points, field.values):
            wr.writerow([repr(float(t)) for t in x] + [repr(float(t)) for t in v])
    return path


def read_field_csv(grid: GridDomain, path: str | Path) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (grid.size, grid.n + grid.blades):
        raise DimensionError(f"CSV shape {data.shape} does not match grid")
    if not np.allclose(data[:, : grid.n], grid.points):
        raise GridMismatch("CSV coordinates do not match grid")
    return Field(grid, data[:, grid.n:])
