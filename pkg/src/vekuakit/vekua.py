"""The Vekua equation Dw = alpha conj(w) + beta w on a grid.

S[w] = w - T[alpha conj(w) + beta w] turns Vekua solutions into monogenic
functions; its inverse is the Neumann series, which converges when
q = (|alpha|_inf + |beta|_inf) diam < 1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .domain import Field, GridDomain, GridMismatch
from .operators import (
    dirac_apply,
    divergence,
    gradient,
    identity_operator,
    laplacian,
    operator_norm,
    s_operator,
    teodorescu_apply,
)


class ContractionError(ValueError):
    """The Neumann series is not guaranteed to converge (q >= 1)."""


class NeumannDivergence(RuntimeError):
    """The Neumann iteration did not reach the tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def _check_positive_scalar(f: Field, name: str) -> np.ndarray:
    if not f.is_scalar():
        raise ValueError(f"{name} must be a scalar field")
    v = f.scalar_part()
    if np.any(v <= 0.0):
        k = int(np.flatnonzero(v <= 0.0)[0])
        raise ValueError(f"{name} must be positive; {name}={v[k]:g} at {f.grid.points[k].tolist()}")
    return v


def log_gradient(f: Field) -> Field:
    """grad(f)/f as a grade-1 field, differentiating log f with the grid stencils."""
    v = _check_positive_scalar(f, "f")
    return Field.vector(f.grid, gradient(f.grid, np.log(v)))


@dataclass
class VekuaProblem:
    """Coefficients alpha, beta of a Vekua equation on a grid."""

    grid: GridDomain
    alpha: Field
    beta: Field
    f: Field | None = None
    g: Field | None = None
    provenance: str = "direct"
    quadrature: str = "product"
    mirrored: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name, fld in (("alpha", self.alpha), ("beta", self.beta)):
            if fld.grid != self.grid:
                raise GridMismatch(f"{name} lives on a different grid")
            if not np.all(np.isfinite(fld.values)):
                raise ValueError(f"{name} has non-finite entries")

    @classmethod
    def trivial(cls, grid: GridDomain) -> VekuaProblem:
        return cls(grid, Field.zeros(grid), Field.zeros(grid))

    @classmethod
    def from_fg(cls, f: Field | None = None, g: Field | None = None, **kw) -> VekuaProblem:
        """alpha = grad f / f, beta = grad g / g; either factor may be omitted (= 1)."""
        ref = f if f is not None else g
        if ref is None:
            raise ValueError("give at least one of f, g")
        grid = ref.grid
        alpha = log_gradient(f) if f is not None else Field.zeros(grid)
        beta = log_gradient(g) if g is not None else Field.zeros(grid)
        return cls(grid, alpha, beta, f=f, g=g, provenance="fg", **kw)

    @property
    def alpha_sup(self) -> float:
        return self.alpha.sup_norm()

    @property
    def beta_sup(self) -> float:
        return self.beta.sup_norm()

    @property
    def q(self) -> float:
        """Contraction bound with |T| <= diam."""
        return (self.alpha_sup + self.beta_sup) * self.grid.diam

    def measured_q(self) -> float:
        """Weighted spectral norm of T[alpha C + beta], i.e. of I - S (dense, small grids)."""
        if "measured_q" not in self._cache:
            self._cache["measured_q"] = operator_norm(identity_operator(self.grid) - self.s_matrix())
        return self._cache["measured_q"]

    def s_matrix(self):
        if "S" not in self._cache:
            self._cache["S"] = s_operator(self.alpha, self.beta, mirrored=self.mirrored,
                                          quadrature=self.quadrature)
        return self._cache["S"]

    def mirror(self) -> VekuaProblem:
        """The adjoint-side equation Dw = conj(w) alpha + conj(beta) w."""
        return VekuaProblem(self.grid, self.alpha, self.beta, self.f, self.g, self.provenance,
                            self.quadrature, not self.mirrored)

    def is_trivial(self) -> bool:
        return not (np.any(self.alpha.values) or np.any(self.beta.values))


def _coeff_term(w: Field, prob: VekuaProblem) -> Field:
    if prob.mirrored:
        return w.conj() * prob.alpha + prob.beta.conj() * w
    return prob.alpha * w.conj() + prob.beta * w


def s_apply(w: Field, prob: VekuaProblem) -> Field:
    """S[w] = w - T[alpha conj(w) + beta w]."""
    if w.grid != prob.grid:
        raise GridMismatch("field and problem live on different grids")
    if prob.is_trivial():
        return w.copy()
    return w - teodorescu_apply(_coeff_term(w, prob), prob.quadrature)


@dataclass
class NeumannResult:
    field: Field
    iterations: int
    increments: list[float]
    ratios: list[float]
    q: float

    @property
    def measured_contraction(self) -> float:
        """Largest observed ratio of successive increments (0 if fewer than two)."""
        return max(self.ratios) if self.ratios else 0.0


def s_inverse_apply(
    v: Field,
    prob: VekuaProblem,
    tol: float = 1e-12,
    max_iter: int = 500,
    allow_noncontractive: bool = False,
    full_output: bool = False,
) -> Field | NeumannResult:
    """Neumann series w_{k+1} = v + T[alpha conj(w_k) + beta w_k].

    Stops when |w_{k+1} - w_k| <= tol |v|.  ``allow_noncontractive`` lets
    the iteration run with q >= 1 (q is only an upper bound).
    """
    if v.grid != prob.grid:
        raise GridMismatch("field and problem live on different grids")
    q = prob.q
    if q >= 1.0:
        if not allow_noncontractive:
            raise ContractionError(f"contraction bound q = {q:.4g} >= 1")
        warnings.warn(f"running the Neumann series with q = {q:.4g} >= 1", RuntimeWarning, stacklevel=2)
    vnorm = v.norm()
    scale = vnorm if vnorm > 0 else 1.0
    w = v.copy()
    increments: list[float] = []
    ratios: list[float] = []
    for k in range(1, max_iter + 1):
        if prob.is_trivial():
            new = v.copy()
        else:
            new = v + teodorescu_apply(_coeff_term(w, prob), prob.quadrature)
        inc = (new - w).norm()
        if increments and increments[-1] > 0:
            ratios.append(inc / increments[-1])
        increments.append(inc)
        w = new
        if not math.isfinite(inc):
            break
        if inc <= tol * scale:
            if full_output:
                return NeumannResult(w, k, increments, ratios, q)
            return w
    residual = (s_apply(w, prob) - v).norm() / scale if math.isfinite(increments[-1]) else math.inf
    raise NeumannDivergence(
        f"Neumann series did not reach tol={tol:g} in {len(increments)} iterations "
        f"(last increment {increments[-1]:.3g})",
        residual,
        len(increments),
    )


def make_vekua_solution(g_monogenic: Field, prob: VekuaProblem, tol: float = 1e-12, max_iter: int = 500) -> Field:
    """S^{-1} of an (approximately) monogenic field."""
    return s_inverse_apply(g_monogenic, prob, tol=tol, max_iter=max_iter)


def region_mask(grid: GridDomain, region: str | int | np.ndarray | None) -> np.ndarray | None:
    """``"interior"`` (boundary excluded), ``"all"``/None, an int margin, or an explicit mask."""
    if region is None or (isinstance(region, str) and region == "all"):
        return None
    if isinstance(region, str):
        if region == "interior":
            return grid.interior_mask
        raise ValueError(f"unknown region {region!r}")
    if isinstance(region, (int, np.integer)):
        return grid.inner_mask(int(region))
    mask = np.asarray(region, dtype=bool)
    if mask.shape != (grid.size,):
        raise ValueError("mask has the wrong length")
    return mask


def vekua_defect(w: Field, prob: VekuaProblem) -> Field:
    """Dw - alpha conj(w) - beta w (mirrored: Dw - conj(w) alpha - conj(beta) w)."""
    if w.grid != prob.grid:
        raise GridMismatch("field and problem live on different grids")
    return dirac_apply(w) - _coeff_term(w, prob)


def vekua_residual(w: Field, prob: VekuaProblem, region="interior", eps: float = 1e-300) -> float:
    """|Dw - alpha conj(w) - beta w| / |w| over the chosen region."""
    mask = region_mask(prob.grid, region)
    return vekua_defect(w, prob).norm(mask) / max(w.norm(mask), eps)


def vekua_residual_report(w: Field, prob: VekuaProblem) -> dict[str, float]:
    return {"interior": vekua_residual(w, prob, "interior"), "all": vekua_residual(w, prob, "all")}


# -- Beltrami, conductivity, Schrodinger -------------------------------------

def beltrami_transform(w: Field, f: Field, g: Field) -> Field:
    """u = w_0/(f g) + (f/g) NSc(w)."""
    fv = _check_positive_scalar(f, "f")
    gv = _check_positive_scalar(g, "g")
    u = w.nonscalar_part() * (fv / gv)
    u.values[:, 0] = w.values[:, 0] / (fv * gv)
    return u


def beltrami_coefficient(f: Field) -> np.ndarray:
    fv = _check_positive_scalar(f, "f")
    return (1.0 - fv ** 2) / (1.0 + fv ** 2)


def beltrami_residual(u: Field, f: Field, region="interior") -> float:
    """|Du - ((1 - f^2)/(1 + f^2)) D conj(u)| / |u|."""
    mask = region_mask(u.grid, region)
    r = dirac_apply(u) - dirac_apply(u.conj()) * beltrami_coefficient(f)
    return r.norm(mask) / max(u.norm(mask), 1e-300)


def _scalar_norm(grid: GridDomain, v: np.ndarray, mask) -> float:
    wts = grid.weights if mask is None else grid.weights * mask
    return math.sqrt(float((wts * v * v).sum()))


def conductivity_residual(w: Field, f: Field, g: Field, region=2) -> float:
    """|div(f^2 grad(w_0/(f g)))| / |w_0|."""
    grid = w.grid
    fv = _check_positive_scalar(f, "f")
    gv = _check_positive_scalar(g, "g")
    w0 = w.scalar_part()
    inner = gradient(grid, w0 / (fv * gv)) * (fv ** 2)[:, None]
    mask = region_mask(grid, region)
    return _scalar_norm(grid, divergence(grid, inner), mask) / max(_scalar_norm(grid, w0, mask), 1e-300)


def schrodinger_residual(w: Field, f: Field, g: Field, region=2) -> float:
    """|(Laplace - Laplace(f)/f)(w_0/g)| / |w_0|."""
    grid = w.grid
    fv = _check_positive_scalar(f, "f")
    gv = _check_positive_scalar(g, "g")
    w0 = w.scalar_part()
    u = w0 / gv
    r = laplacian(grid, u) - laplacian(grid, fv) / fv * u
    mask = region_mask(grid, region)
    return _scalar_norm(grid, r, mask) / max(_scalar_norm(grid, w0, mask), 1e-300)
