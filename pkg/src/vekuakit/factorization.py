"""Schrodinger factorizations of the Vekua operator and its adjoint.

(D - aC - b)(D - M^a C - conj b) h0 and the opposite order, for scalar h0,
have scalar parts (-Laplace + V) h0 with potentials built from a, b.  The
left sides here come from stencils on the potential, the right sides from
composing assembled operators.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .clifford import conjugate_coeffs
from .domain import Field, GridDomain, GridMismatch
from .operators import (
    adjoint_vekua_operator,
    dirac_apply,
    divergence,
    laplacian,
    right_dirac_apply,
    vekua_operator,
)
from .vekua import _check_positive_scalar, log_gradient, region_mask

ORDERS = ("forward", "adjoint")


def _vector_part(a: Field) -> np.ndarray:
    return a.values[:, [1 << i for i in range(a.grid.n)]]


@dataclass
class PotentialSpec:
    alpha: Field
    beta: Field
    f: Field | None = None
    g: Field | None = None

    def __post_init__(self):
        if self.alpha.grid != self.beta.grid:
            raise GridMismatch("alpha and beta live on different grids")
        for name, fn, coef in (("f", self.f, self.alpha), ("g", self.g, self.beta)):
            if fn is not None:
                gap = (coef - log_gradient(fn)).norm()
                if gap > 1e-8 * max(1.0, coef.norm()):
                    raise ValueError(f"{name} does not match its coefficient (gap {gap:.3g})")

    @property
    def grid(self) -> GridDomain:
        return self.alpha.grid

    @cached_property
    def abs2_alpha(self) -> np.ndarray:
        return (self.alpha.values ** 2).sum(axis=1)

    @cached_property
    def abs2_beta(self) -> np.ndarray:
        return (self.beta.values ** 2).sum(axis=1)

    @cached_property
    def div_alpha(self) -> np.ndarray:
        return divergence(self.grid, _vector_part(self.alpha))

    @cached_property
    def div_beta(self) -> np.ndarray:
        return divergence(self.grid, _vector_part(self.beta))

    @cached_property
    def alpha_dot_beta_bar(self) -> np.ndarray:
        return (self.alpha.values * conjugate_coeffs(self.beta.values)).sum(axis=1)

    @cached_property
    def alpha_dot_beta(self) -> np.ndarray:
        return (self.alpha.values * self.beta.values).sum(axis=1)

    def potential(self, order: str = "forward") -> np.ndarray:
        base = self.abs2_alpha + self.abs2_beta + self.div_alpha
        if order == "forward":
            return base - self.div_beta + 2.0 * self.alpha_dot_beta_bar
        if order == "adjoint":
            return base + self.div_beta + 2.0 * self.alpha_dot_beta
        raise ValueError(f"unknown order {order!r}; choose from {ORDERS}")


def potential_from_fg(f: Field, g: Field) -> PotentialSpec:
    """alpha = grad f / f, beta = grad g / g (logarithmic stencil gradients)."""
    _check_positive_scalar(f, "f")
    _check_positive_scalar(g, "g")
    return PotentialSpec(log_gradient(f), log_gradient(g), f, g)


def schrodinger_potential_fg(f: Field, g: Field, order: str = "forward") -> np.ndarray:
    """Closed forms: Lf/f - Lg/g + 2 b.(b - a) forward, Lf/f + Lg/g + 2 a.b adjoint."""
    grid = f.grid
    fv = _check_positive_scalar(f, "f")
    gv = _check_positive_scalar(g, "g")
    a = _vector_part(log_gradient(f))
    b = _vector_part(log_gradient(g))
    lf = laplacian(grid, fv) / fv
    lg = laplacian(grid, gv) / gv
    if order == "forward":
        return lf - lg + 2.0 * (b * (b - a)).sum(axis=1)
    if order == "adjoint":
        return lf + lg + 2.0 * (a * b).sum(axis=1)
    raise ValueError(f"unknown order {order!r}")


def _composed(spec: PotentialSpec, order: str):
    A = vekua_operator(spec.alpha, spec.beta)
    B = adjoint_vekua_operator(spec.alpha, spec.beta)
    if order == "forward":
        return A @ B
    if order == "adjoint":
        return B @ A
    raise ValueError(f"unknown order {order!r}; choose from {ORDERS}")


def composed_scalar(h0: Field, spec: PotentialSpec, order: str = "forward") -> np.ndarray:
    """Sc of the composed operators applied to h0."""
    return _composed(spec, order).apply(h0).scalar_part()


def _norm(grid: GridDomain, v: np.ndarray, mask) -> float:
    wts = grid.weights if mask is None else grid.weights * mask
    return float(np.sqrt((wts * v * v).sum()))


def factorization_residual(h0: Field, spec: PotentialSpec, order: str = "forward",
                           region=2, potential: np.ndarray | None = None) -> float:
    """|(-Laplace + V) h0 - Sc[composed] h0| / |h0|.

    ``region=2`` drops the two outer layers, where the composed first-order
    stencils meet the one-sided boundary stencils.
    """
    if not h0.is_scalar():
        raise ValueError("h0 must be scalar")
    if h0.grid != spec.grid:
        raise GridMismatch("h0 and the potential live on different grids")
    grid = h0.grid
    u = h0.scalar_part()
    V = spec.potential(order) if potential is None else potential
    lhs = -laplacian(grid, u) + V * u
    rhs = composed_scalar(h0, spec, order)
    mask = region_mask(grid, region)
    return _norm(grid, lhs - rhs, mask) / max(_norm(grid, u, mask), 1e-300)


def factorization_expansion(h: Field, spec: PotentialSpec) -> Field:
    """-Lh - D(conj(h) a) - D(conj(b) h) + a (conj(h) D + conj(a) h + conj(h) b) - b (Dh - conj(h) a - conj(b) h).

    ``conj(h) D`` is the Dirac operator acting from the right on conj(h).
    """
    a, b = spec.alpha, spec.beta
    hb = h.conj()
    lap = Field(h.grid, laplacian(h.grid, h.values))
    return (
        -lap
        - dirac_apply(hb * a)
        - dirac_apply(b.conj() * h)
        + a * (right_dirac_apply(hb) + a.conj() * h + hb * b)
        - b * (dirac_apply(h) - hb * a - b.conj() * h)
    )


def full_factorization_residual(h: Field, spec: PotentialSpec, region=2) -> float:
    """|composed(h) - expansion(h)| / |h| for any Clifford-valued h."""
    if h.grid != spec.grid:
        raise GridMismatch("h and the potential live on different grids")
    mask = region_mask(h.grid, region)
    diff = _composed(spec, "forward").apply(h) - factorization_expansion(h, spec)
    return diff.norm(mask) / max(h.norm(mask), 1e-300)
