"""Discrete Dirac-type operators on a GridDomain.

Flattened fields are indexed ``point * 2^n + blade``.  Differential and
multiplication operators are sparse; the Teodorescu transform is dense.
"""
from __future__ import annotations

import math
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp

from .clifford import Multivector, blade_table, generator_left_matrices, left_matrix, right_matrix
from .domain import Field, GridDomain, GridMismatch


# -- finite differences -------------------------------------------------------

def derivative_matrix_1d(m: int, h: float) -> sp.csr_matrix:
    """Second-order first derivative: centered inside, one-sided at both ends."""
    if m < 3:
        raise ValueError(f"need m >= 3 for second-order stencils, got {m}")
    rows, cols, vals = [], [], []
    for i in range(1, m - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-0.5, 0.5]
    rows += [0, 0, 0, m - 1, m - 1, m - 1]
    cols += [0, 1, 2, m - 1, m - 2, m - 3]
    vals += [-1.5, 2.0, -0.5, 1.5, -2.0, 0.5]
    return sp.csr_matrix((np.array(vals) / h, (rows, cols)), shape=(m, m))


def second_derivative_matrix_1d(m: int, h: float) -> sp.csr_matrix:
    """Second-order second derivative: 3-point centered, 4-point one-sided ends."""
    if m < 4:
        raise ValueError(f"need m >= 4 for one-sided second derivatives, got {m}")
    rows, cols, vals = [], [], []
    for i in range(1, m - 1):
        rows += [i, i, i]
        cols += [i - 1, i, i + 1]
        vals += [1.0, -2.0, 1.0]
    for end, step in ((0, 1), (m - 1, -1)):
        rows += [end] * 4
        cols += [end, end + step, end + 2 * step, end + 3 * step]
        vals += [2.0, -5.0, 4.0, -1.0]
    return sp.csr_matrix((np.array(vals) / h ** 2, (rows, cols)), shape=(m, m))


def _along_axis(grid: GridDomain, axis: int, mat1d: sp.spmatrix) -> sp.csr_matrix:
    mats = [sp.identity(grid.m, format="csr")] * grid.n
    mats[axis] = mat1d
    out = mats[0]
    for mtx in mats[1:]:
        out = sp.kron(out, mtx, format="csr")
    return out.tocsr()


@lru_cache(maxsize=16)
def partial_matrix(grid: GridDomain, axis: int) -> sp.csr_matrix:
    """N x N matrix of d/dx_axis on scalar grid functions."""
    return _along_axis(grid, axis, derivative_matrix_1d(grid.m, grid.h[axis]))


@lru_cache(maxsize=16)
def second_partial_matrix(grid: GridDomain, axis: int) -> sp.csr_matrix:
    return _along_axis(grid, axis, second_derivative_matrix_1d(grid.m, grid.h[axis]))


def gradient(grid: GridDomain, f: np.ndarray) -> np.ndarray:
    """(N, n) stencil gradient of a scalar array."""
    return np.stack([partial_matrix(grid, i) @ f for i in range(grid.n)], axis=1)


def divergence(grid: GridDomain, v: np.ndarray) -> np.ndarray:
    return sum(partial_matrix(grid, i) @ v[:, i] for i in range(grid.n))


def laplacian(grid: GridDomain, f: np.ndarray) -> np.ndarray:
    """Compact-stencil Laplacian; works column-wise on (N, k) arrays too."""
    return sum(second_partial_matrix(grid, i) @ f for i in range(grid.n))


def dirac_apply(w: Field) -> Field:
    """D w = sum_i e_i (d_i w), generators acting from the left."""
    grid = w.grid
    if grid.m < 3:
        raise ValueError("the Dirac stencil needs m >= 3")
    out = np.zeros_like(w.values)
    for i, L in enumerate(generator_left_matrices(grid.n)):
        out += (partial_matrix(grid, i) @ w.values) @ L.T
    return Field(grid, out)


def right_dirac_apply(w: Field) -> Field:
    """w D = sum_i (d_i w) e_i, generators acting from the right."""
    grid = w.grid
    out = np.zeros_like(w.values)
    for i in range(grid.n):
        e = np.zeros(grid.blades)
        e[1 << i] = 1.0
        out += (partial_matrix(grid, i) @ w.values) @ right_matrix(e).T
    return Field(grid, out)


# -- Cauchy kernel and Teodorescu transform -----------------------------------

def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


class CauchyKernelConstants:
    def __init__(self, n: int):
        self.n = n
        self.sigma = sphere_area(n)

    def __repr__(self) -> str:
        return f"CauchyKernelConstants(n={self.n}, sigma={self.sigma!r})"


class SingularityError(ValueError):
    pass


def cauchy_kernel(x: Sequence[float]) -> Multivector:
    """E(x) = -x / (sigma_n |x|^n) as a grade-1 multivector."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise SingularityError("the Cauchy kernel is singular at the origin")
    return Multivector.vector(-x / (sphere_area(x.size) * r ** x.size))


QUADRATURES = ("product", "trapezoid")


def _unit_gauss(n: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    x = (x + 1.0) / 2.0
    w = w / 2.0
    pts = np.stack(np.meshgrid(*([x] * n), indexing="ij"), axis=-1).reshape(-1, n)
    wts = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij"), axis=-1).reshape(-1, n), axis=1)
    return pts, wts


def _corner_weights(t: np.ndarray) -> np.ndarray:
    """Multilinear nodal functions at local coordinates t in [0,1]^n -> (..., 2^n)."""
    n = t.shape[-1]
    out = []
    for kappa in range(1 << n):
        phi = np.ones(t.shape[:-1])
        for d in range(n):
            phi = phi * (t[..., d] if kappa >> d & 1 else 1.0 - t[..., d])
        out.append(phi)
    return np.stack(out, axis=-1)


def _kernel(r: np.ndarray, sigma: float) -> np.ndarray:
    """r / (sigma |r|^n), the negated Cauchy kernel, over the last axis."""
    n = r.shape[-1]
    rn = np.sqrt((r ** 2).sum(axis=-1)) ** n
    return r / (sigma * rn[..., None])


def _singular_cell_moments(corner: np.ndarray, h: np.ndarray, sigma: float,
                           depth: int = 40, q: int = 6) -> np.ndarray:
    """Moments of a cell with the singularity at local vertex ``corner`` (0/1 per axis).

    The cell is halved repeatedly toward the singular vertex; every other
    sub-cell is smooth and gets tensor Gauss.  Returns (2^n corners, n).
    """
    n = h.size
    pts, wts = _unit_gauss(n, q)
    out = np.zeros((1 << n, n))
    lo = np.zeros(n)                       # sub-cell origin in local coords
    size = 1.0
    for _ in range(depth):
        half = size / 2
        for sub in range(1 << n):
            off = np.array([(sub >> d) & 1 for d in range(n)], dtype=float)
            sub_lo = lo + off * half
            if np.all(np.where(corner == 1, sub_lo + half == 1.0, sub_lo == 0.0)):
                continue                   # the piece that still touches the singularity
            t = sub_lo + half * pts
            r = (t - corner) * h
            k = _kernel(r, sigma)          # (P, n)
            phi = _corner_weights(t)       # (P, 2^n)
            out += np.einsum("p,pk,pi->ki", wts * half ** n * np.prod(h), phi, k)
        lo = lo + np.where(corner == 1, half, 0.0)
        size = half
    return out


def _cell_moments(grid: GridDomain) -> np.ndarray:
    """G[cell offset, corner, axis] for every cell offset in [-(m-1), m-2]^n.

    The evaluation point sits at the origin; cell ``c`` spans
    [c h, (c+1) h] and corner ``kappa`` is its multilinear nodal function.
    """
    n, m = grid.n, grid.m
    h = np.array(grid.h)
    sigma = sphere_area(n)
    span = np.arange(-(m - 1), m - 1)
    cells = np.stack(np.meshgrid(*([span] * n), indexing="ij"), axis=-1).reshape(-1, n)
    G = np.zeros((len(cells), 1 << n, n))
    reach = np.abs(cells + 0.5).max(axis=1)  # distance in cells, centre to origin
    touching = np.all((cells == 0) | (cells == -1), axis=1)
    for q, sel in ((4, reach > 6), (10, (reach <= 6) & ~touching)):
        if not sel.any():
            continue
        pts, wts = _unit_gauss(n, q)
        phi = _corner_weights(pts)                         # (P, K)
        r = (cells[sel][:, None, :] + pts[None, :, :]) * h  # (C, P, n)
        k = _kernel(r, sigma)
        G[sel] = np.einsum("p,pk,cpi->cki", wts * np.prod(h), phi, k)
    for c in np.flatnonzero(touching):
        corner = (cells[c] == -1).astype(float)  # singular vertex in local coords
        G[c] = _singular_cell_moments(corner, h, sigma)
    return G


def _product_kernels(grid: GridDomain) -> np.ndarray:
    n, m = grid.n, grid.m
    G = _cell_moments(grid)
    span = 2 * m - 2
    idx = grid.index_grid
    K = np.zeros((n, grid.size, grid.size))
    for kappa in range(1 << n):
        kv = np.array([(kappa >> d) & 1 for d in range(n)])
        cell = idx - kv                                     # lower node of the cell, per y
        valid = np.all((cell >= 0) & (cell <= m - 2), axis=1)
        off = cell[None, valid, :] - idx[:, None, :] + (m - 1)   # (N, Nv, n) in [0, span)
        flat = np.ravel_multi_index(tuple(np.moveaxis(off, -1, 0)), (span,) * n)
        K[:, :, valid] += np.moveaxis(G[flat, kappa, :], -1, 0)
    return K


def _trapezoid_kernels(grid: GridDomain) -> np.ndarray:
    P = grid.points
    diff = P[None, :, :] - P[:, None, :]           # y - x
    r = np.sqrt((diff ** 2).sum(axis=2))
    np.fill_diagonal(r, np.inf)                    # singular cell contributes nothing
    scale = grid.weights[None, :] / (sphere_area(grid.n) * r ** grid.n)
    return np.moveaxis(diff * scale[:, :, None], 2, 0).copy()


@lru_cache(maxsize=4)
def teodorescu_kernels(grid: GridDomain, quadrature: str = "product") -> np.ndarray:
    """Real matrices K[i] with T[w](x) = sum_i e_i (K[i] w)(x).

    ``product``: w is replaced by its multilinear interpolant and the kernel
    is integrated exactly against each nodal function (recursive refinement
    on the cells touching the singular point).  ``trapezoid``: the plain
    trapezoid rule with the singular point left out.
    """
    if quadrature == "product":
        K = _product_kernels(grid)
    elif quadrature == "trapezoid":
        K = _trapezoid_kernels(grid)
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}; choose from {QUADRATURES}")
    K.setflags(write=False)
    return K


def teodorescu_apply(w: Field, quadrature: str = "product") -> Field:
    """T[w](x) = -integral of E(y - x) w(y) dy."""
    grid = w.grid
    K = teodorescu_kernels(grid, quadrature)
    out = np.zeros_like(w.values)
    for i, L in enumerate(generator_left_matrices(grid.n)):
        out += (K[i] @ w.values) @ L.T
    return Field(grid, out)


# -- assembled operators ------------------------------------------------------

def _is_sparse(a) -> bool:
    return sp.issparse(a)


def _add(a, b):
    if _is_sparse(a) and _is_sparse(b):
        return (a + b).tocsr()
    a = a.toarray() if _is_sparse(a) else a
    b = b.toarray() if _is_sparse(b) else b
    return a + b


class RealLinearOperator:
    """An R-linear map on flattened fields of one grid."""

    def __init__(self, matrix, grid: GridDomain, label: str = ""):
        if matrix.shape != (grid.ndof, grid.ndof):
            raise ValueError(f"matrix shape {matrix.shape} does not match grid ndof {grid.ndof}")
        self.matrix = matrix.tocsr() if _is_sparse(matrix) else np.asarray(matrix, dtype=float)
        self.grid = grid
        self.label = label

    def __repr__(self) -> str:
        kind = "sparse" if self.is_sparse else "dense"
        return f"RealLinearOperator({self.label or '?'}, {kind}, ndof={self.grid.ndof})"

    @property
    def is_sparse(self) -> bool:
        return _is_sparse(self.matrix)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else self.matrix

    def apply(self, w: Field) -> Field:
        if w.grid != self.grid:
            raise GridMismatch("operator and field live on different grids")
        return Field(self.grid, np.asarray(self.matrix @ w.flat()))

    __call__ = apply

    def _check(self, other: RealLinearOperator) -> None:
        if other.grid != self.grid:
            raise GridMismatch("operators live on different grids")

    def __matmul__(self, other):
        if isinstance(other, Field):
            return self.apply(other)
        self._check(other)
        prod = self.matrix @ other.matrix
        if _is_sparse(prod):
            prod = prod.tocsr()
        return RealLinearOperator(prod, self.grid, f"({self.label})({other.label})")

    def __add__(self, other: RealLinearOperator) -> RealLinearOperator:
        self._check(other)
        return RealLinearOperator(_add(self.matrix, other.matrix), self.grid, f"{self.label} + {other.label}")

    def __sub__(self, other: RealLinearOperator) -> RealLinearOperator:
        return self + (-other)

    def __neg__(self) -> RealLinearOperator:
        return RealLinearOperator(-self.matrix, self.grid, f"-{self.label}")

    def __mul__(self, c: float) -> RealLinearOperator:
        return RealLinearOperator(self.matrix * float(c), self.grid, f"{c:g}*{self.label}")

    __rmul__ = __mul__

    def adjoint(self) -> RealLinearOperator:
        """Adjoint under the weighted scalar product: W^{-1} A^T W."""
        w = np.repeat(self.grid.weights, self.grid.blades)
        if self.is_sparse:
            adj = sp.diags(1.0 / w) @ self.matrix.T @ sp.diags(w)
        else:
            adj = self.matrix.T * w[None, :] / w[:, None]
        label = self.label[:-1] if self.label.endswith("*") else self.label + "*"
        return RealLinearOperator(adj, self.grid, label)

    def save(self, path: str | Path) -> Path:
        """Dump the dense matrix: ``.npy`` for binary, anything else as CSV."""
        path = Path(path)
        if path.suffix == ".npy":
            np.save(path, self.dense())
        else:
            np.savetxt(path, self.dense(), delimiter=",")
        return path


def identity_operator(grid: GridDomain) -> RealLinearOperator:
    return RealLinearOperator(sp.identity(grid.ndof, format="csr"), grid, "I")


@lru_cache(maxsize=8)
def _dirac_matrix(grid: GridDomain) -> sp.csr_matrix:
    out = None
    for i, L in enumerate(generator_left_matrices(grid.n)):
        term = sp.kron(partial_matrix(grid, i), sp.csr_matrix(L), format="csr")
        out = term if out is None else out + term
    return out.tocsr()


def dirac_operator(grid: GridDomain) -> RealLinearOperator:
    return RealLinearOperator(_dirac_matrix(grid), grid, "D")


def teodorescu_operator(grid: GridDomain, quadrature: str = "product") -> RealLinearOperator:
    K = teodorescu_kernels(grid, quadrature)
    mat = sum(np.kron(K[i], L) for i, L in enumerate(generator_left_matrices(grid.n)))
    return RealLinearOperator(mat, grid, "T")


def conjugation_operator(grid: GridDomain) -> RealLinearOperator:
    signs = np.tile(blade_table(grid.n).conj_sign, grid.size)
    return RealLinearOperator(sp.diags(signs, format="csr"), grid, "C")


def _block_diagonal(blocks: np.ndarray) -> sp.csr_matrix:
    N, B, _ = blocks.shape
    return sp.bsr_matrix((blocks, np.arange(N), np.arange(N + 1)), shape=(N * B, N * B)).tocsr()


def left_multiplication(a: Field, label: str = "L") -> RealLinearOperator:
    """w -> a w (pointwise)."""
    return RealLinearOperator(_block_diagonal(left_matrix(a.values)), a.grid, label)


def right_multiplication(a: Field, label: str = "M") -> RealLinearOperator:
    """w -> w a (pointwise); M^alpha in the Hodge decomposition."""
    return RealLinearOperator(_block_diagonal(right_matrix(a.values)), a.grid, label)


def vekua_operator(alpha: Field, beta: Field) -> RealLinearOperator:
    """w -> Dw - alpha conj(w) - beta w."""
    if alpha.grid != beta.grid:
        raise GridMismatch("alpha and beta live on different grids")
    grid = alpha.grid
    C = conjugation_operator(grid)
    op = dirac_operator(grid) - left_multiplication(alpha) @ C - left_multiplication(beta)
    op.label = "D - aC - b"
    return op


def adjoint_vekua_operator(alpha: Field, beta: Field) -> RealLinearOperator:
    """h -> Dh - conj(h) alpha - conj(beta) h."""
    if alpha.grid != beta.grid:
        raise GridMismatch("alpha and beta live on different grids")
    grid = alpha.grid
    C = conjugation_operator(grid)
    op = dirac_operator(grid) - right_multiplication(alpha) @ C - left_multiplication(beta.conj())
    op.label = "D - M^a C - conj(b)"
    return op


def s_operator(alpha: Field, beta: Field, mirrored: bool = False,
               quadrature: str = "product") -> RealLinearOperator:
    """Assembled I - T[alpha C + beta I] (or the mirrored I - T[M^alpha C + conj(beta) I])."""
    grid = alpha.grid
    C = conjugation_operator(grid)
    if mirrored:
        inner = right_multiplication(alpha) @ C + left_multiplication(beta.conj())
    else:
        inner = left_multiplication(alpha) @ C + left_multiplication(beta)
    op = identity_operator(grid) - teodorescu_operator(grid, quadrature) @ inner
    op.label = "S'" if mirrored else "S"
    return op


def assemble(spec: Any, grid: GridDomain | None = None) -> RealLinearOperator:
    """Build an operator from a small spec language.

    ``"D"``, ``"T"``, ``"C"``, ``"I"``; ``("left", field)``; ``("right", field)``;
    ``("compose", s1, s2, ...)`` meaning s1 after s2 after ...;
    ``("sum", [(coef, s), ...])``; ``("vekua", alpha, beta)``;
    ``("adjoint_vekua", alpha, beta)``; ``("S", alpha, beta)``;
    ``("adjoint", s)``.  Operators pass through unchanged.
    """
    if isinstance(spec, RealLinearOperator):
        return spec
    if isinstance(spec, str):
        if grid is None:
            raise ValueError(f"operator {spec!r} needs a grid")
        table = {
            "D": dirac_operator,
            "T": teodorescu_operator,
            "C": conjugation_operator,
            "I": identity_operator,
        }
        if spec not in table:
            raise ValueError(f"unknown operator spec {spec!r}")
        return table[spec](grid)
    if isinstance(spec, tuple) and spec:
        head, *rest = spec
        if head == "left" and len(rest) == 1 and isinstance(rest[0], Field):
            return left_multiplication(rest[0])
        if head == "right" and len(rest) == 1 and isinstance(rest[0], Field):
            return right_multiplication(rest[0])
        if head == "compose" and rest:
            ops = [assemble(s, grid) for s in rest]
            out = ops[0]
            for op in ops[1:]:
                out = out @ op
            return out
        if head == "sum" and len(rest) == 1:
            terms = [float(c) * assemble(s, grid) for c, s in rest[0]]
            if not terms:
                raise ValueError("empty sum")
            out = terms[0]
            for t in terms[1:]:
                out = out + t
            return out
        if head == "vekua" and len(rest) == 2:
            return vekua_operator(*rest)
        if head == "adjoint_vekua" and len(rest) == 2:
            return adjoint_vekua_operator(*rest)
        if head == "S" and len(rest) == 2:
            return s_operator(*rest)
        if head == "adjoint" and len(rest) == 1:
            return assemble(rest[0], grid).adjoint()
    raise ValueError(f"unknown operator spec {spec!r}")


def adjoint(A: RealLinearOperator) -> RealLinearOperator:
    return A.adjoint()


def operator_norm(A: RealLinearOperator) -> float:
    """Largest singular value with respect to the weighted scalar product."""
    s = np.sqrt(np.repeat(A.grid.weights, A.grid.blades))
    M = A.dense() * s[:, None] / s[None, :]
    return float(np.linalg.norm(M, 2))
