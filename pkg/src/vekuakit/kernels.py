"""Component-wise reproducing kernels of a truncated Vekua (or Bergman) space.

With an orthonormal system {e_k}, K^A(x, y) = sum_k [e_k(x)]_A e_k(y).  For
fixed x the map y -> K^A(x, y) lies in the span and reproduces the e_A
coefficient of the projection at x.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .clifford import Multivector, blade_square, blade_table
from .domain import Field, GridMismatch, scalar_product, write_field_csv
from .hodge import OrthonormalSystem

MEMORY_CAP = 256 * 2 ** 20   # bytes for a materialized table


def _point_index(basis: OrthonormalSystem, x) -> int:
    if isinstance(x, (int, np.integer)):
        if not 0 <= x < basis.grid.size:
            raise IndexError(f"point index {x} out of range")
        return int(x)
    return basis.grid.locate(x)


def _values(basis: OrthonormalSystem) -> np.ndarray:
    """Basis as (N, 2^n, k)."""
    g = basis.grid
    return basis.Q.reshape(g.size, g.blades, len(basis))


def blade_weights(n: int) -> np.ndarray:
    """(-1)^{|B|(|B|+1)/2} times the scalar e_B^2, per blade; all equal to +1."""
    tab = blade_table(n)
    sq = np.array([blade_square(n, B).coeffs for B in range(1 << n)])
    if np.any(sq[:, 1:]):
        raise ArithmeticError("a blade square has a non-scalar part")
    return tab.conj_sign * sq[:, 0]


def kernel_eval(A: int, x, y, basis: OrthonormalSystem) -> Multivector:
    """K^A(x, y) as a multivector."""
    V = _values(basis)
    ix, iy = _point_index(basis, x), _point_index(basis, y)
    return Multivector(V[iy] @ V[ix, A])


def kernel_slice(A: int, x, basis: OrthonormalSystem) -> Field:
    """The field y -> K^A(x, y)."""
    V = _values(basis)
    ix = _point_index(basis, x)
    return Field.from_flat(basis.grid, basis.Q @ V[ix, A])


def reproduce_component(w: Field, A: int, x, basis: OrthonormalSystem) -> float:
    """<K^A(x, .), w>, which is [P w]_A(x)."""
    if w.grid != basis.grid:
        raise GridMismatch("field and basis live on different grids")
    return scalar_product(kernel_slice(A, x, basis), w)


def kernel_symmetry_residual(A: int, B: int, basis: OrthonormalSystem,
                             pairs: Sequence[tuple[int, int]] | None = None,
                             samples: int = 200, seed: int = 0) -> float:
    """max |[K^A]_B(x, y) - [K^B]_A(y, x)| over sampled point pairs."""
    N = basis.grid.size
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = list(zip(rng.integers(0, N, samples), rng.integers(0, N, samples)))
    worst = 0.0
    for x, y in pairs:
        lhs = kernel_eval(A, int(x), int(y), basis)[B]
        rhs = kernel_eval(B, int(y), int(x), basis)[A]
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass
class KernelTable:
    """All K^B(y, x) for one basis, materialized if it fits ``cap`` bytes."""

    basis: OrthonormalSystem
    cap: int = MEMORY_CAP
    table: np.ndarray | None = field(default=None, repr=False)

    @property
    def nbytes(self) -> int:
        g = self.basis.grid
        return g.size * g.size * g.blades * g.blades * 8

    def materialize(self) -> KernelTable:
        if self.table is None:
            if self.nbytes > self.cap:
                raise MemoryError(f"kernel table needs {self.nbytes} bytes, cap is {self.cap}")
            V = _values(self.basis)
            # table[B, y, x, :] = sum_k [e_k(y)]_B e_k(x)
            self.table = np.einsum("ybk,xck->byxc", V, V, optimize=True)
        return self

    def __call__(self, A: int, x: int, y: int) -> Multivector:
        if self.table is not None:
            return Multivector(self.table[A, x, y])
        return kernel_eval(A, x, y, self.basis)

    def diagonal(self, A: int) -> np.ndarray:
        """[K^A]_A(x, x) for every x."""
        V = _values(self.basis)
        return np.einsum("xk,xk->x", V[:, A], V[:, A])

    def project(self, w: Field) -> Field:
        """P[w](x) = sum_y weight(y) sum_B (-1)^{|B|(|B|+1)/2} e_B^2 K^B(y, x) w_B(y)."""
        grid = self.basis.grid
        if w.grid != grid:
            raise GridMismatch("field and basis live on different grids")
        fac = blade_weights(grid.n)
        src = grid.weights[:, None] * fac[None, :] * w.values   # (N, 2^n), indexed [y, B]
        if self.table is not None:
            return Field(grid, np.einsum("yb,byxc->xc", src, self.table, optimize=True))
        V = _values(self.basis)
        coeff = np.einsum("yb,ybk->k", src, V)
        return Field(grid, V @ coeff)


def kernel_projection(w: Field, basis: OrthonormalSystem, materialize: bool | None = None,
                      cap: int = MEMORY_CAP) -> Field:
    """Vekua projection written through the kernels.

    ``materialize=None`` builds the full table when it fits ``cap``.
    """
    kt = KernelTable(basis, cap)
    if materialize or (materialize is None and kt.nbytes <= cap):
        kt.materialize()
    return kt.project(w)


def trivial_beta_residual(w: Field, vekua: OrthonormalSystem, monogenic: OrthonormalSystem,
                          g: Field) -> float:
    """|kernel_projection(w) - g P_Omega[w / g]| / |kernel_projection(w)| for alpha = 0, beta = grad g / g."""
    gv = g.scalar_part()
    if not g.is_scalar() or np.any(gv <= 0):
        raise ValueError("g must be a positive scalar field")
    lhs = kernel_projection(w, vekua)
    rhs = monogenic.project(w / gv) * gv
    return (lhs - rhs).norm() / max(lhs.norm(), 1e-300)


def export_kernel_slice(A: int, x, basis: OrthonormalSystem, path: str | Path) -> Path:
    return write_field_csv(kernel_slice(A, x, basis), path)
