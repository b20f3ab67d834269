"""Discrete Bergman and Vekua spaces, their projections and the Hodge split.

The spaces are Galerkin spans: monogenic candidates Pi[x^gamma e_A] with
Pi = I - T D, and their images under S^{-1} for the Vekua space.  All
orthogonality is with respect to the weighted scalar product.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la

from .domain import Field, GridDomain, GridMismatch, TestFunctionSystem, scalar_product, test_function_basis
from .operators import adjoint_vekua_operator, dirac_apply, dirac_operator, teodorescu_apply, vekua_operator
from .vekua import VekuaProblem, region_mask, s_apply, s_inverse_apply, vekua_residual

DROP_TOL = 1e-8
CONDITION_LIMIT = 1e8
PROJECTION_MODES = ("galerkin", "star", "conj")


class EmptyBasisError(ValueError):
    pass


class ConditioningError(RuntimeError):
    """The assembled S is singular or too ill-conditioned to invert."""


def _wvec(grid: GridDomain) -> np.ndarray:
    return np.repeat(grid.weights, grid.blades)


# -- orthonormal systems ------------------------------------------------------

@dataclass(frozen=True)
class OrthonormalSystem:
    """Columns of ``Q`` are orthonormal in the weighted scalar product."""

    grid: GridDomain
    Q: np.ndarray                 # (ndof, k)
    provenance: tuple[str, ...]   # one label per member
    dropped: int
    residuals: np.ndarray         # defining residual per member
    kind: str = "monogenic"

    def __len__(self) -> int:
        return self.Q.shape[1]

    def __getitem__(self, k: int) -> Field:
        return Field.from_flat(self.grid, self.Q[:, k])

    @property
    def members(self) -> list[Field]:
        return [self[k] for k in range(len(self))]

    @property
    def build_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0

    def gram(self) -> np.ndarray:
        return self.Q.T @ (_wvec(self.grid)[:, None] * self.Q)

    def gram_residual(self) -> float:
        return float(np.abs(self.gram() - np.eye(len(self))).max())

    def coefficients(self, w: Field) -> np.ndarray:
        if w.grid != self.grid:
            raise GridMismatch("field and basis live on different grids")
        return self.Q.T @ (_wvec(self.grid) * w.flat())

    def project(self, w: Field) -> Field:
        return Field.from_flat(self.grid, self.Q @ self.coefficients(w))

    def matrix(self) -> np.ndarray:
        """Dense projector Q Q^T W."""
        return self.Q @ (self.Q.T * _wvec(self.grid)[None, :])

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "members": len(self),
            "dropped": self.dropped,
            "gram_residual": self.gram_residual(),
            "build_residual": self.build_residual,
            "member_residuals": [float(r) for r in self.residuals],
            "provenance": list(self.provenance),
        }

    def save_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_record(), indent=2))
        return path


def gram_schmidt(
    grid: GridDomain,
    candidates: Sequence[np.ndarray],
    labels: Sequence[str],
    drop_tol: float = DROP_TOL,
) -> tuple[np.ndarray, list[str], int]:
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    A candidate is dropped when what survives orthogonalization is below
    ``drop_tol`` times its original norm.
    """
    w = _wvec(grid)
    kept: list[np.ndarray] = []
    kept_labels: list[str] = []
    dropped = 0
    for c, lab in zip(candidates, labels):
        v = np.array(c, dtype=float)
        n0 = math.sqrt(float(w @ (v * v)))
        if n0 == 0.0:
            dropped += 1
            continue
        for _ in range(2):
            for q in kept:
                v -= (w @ (q * v)) * q
        nv = math.sqrt(float(w @ (v * v)))
        if nv <= drop_tol * n0:
            dropped += 1
            continue
        kept.append(v / nv)
        kept_labels.append(lab)
    Q = np.stack(kept, axis=1) if kept else np.zeros((grid.ndof, 0))
    return Q, kept_labels, dropped


def multi_indices(n: int, max_degree: int) -> list[tuple[int, ...]]:
    """All gamma with |gamma| <= max_degree, graded then lexicographic."""
    out = []
    for d in range(max_degree + 1):
        out += sorted((g for g in itertools.product(range(d + 1), repeat=n) if sum(g) == d), reverse=True)
    return out


def _monomial(grid: GridDomain, gamma: tuple[int, ...]) -> np.ndarray:
    return np.prod(_scaled_coords(grid) ** np.array(gamma), axis=1)


def _gamma_label(gamma: tuple[int, ...], blade: int) -> str:
    mono = "*".join(f"x{i + 1}^{g}" for i, g in enumerate(gamma) if g) or "1"
    return f"Pi[{mono} e{blade}]"


def _scaled_coords(grid: GridDomain) -> np.ndarray:
    lo = np.array([b[0] for b in grid.box])
    hi = np.array([b[1] for b in grid.box])
    return (grid.points - (lo + hi) / 2) / ((hi - lo) / 2)


def fueter_variables(grid: GridDomain) -> list[Field]:
    """z_i = t_i + t_n e_n e_i (i < n) in centered, scaled coordinates t; D z_i = 0."""
    n = grid.n
    t = _scaled_coords(grid)
    out = []
    for i in range(n - 1):
        v = np.zeros((grid.size, grid.blades))
        v[:, 0] = t[:, i]
        # e_n e_i = -e_i e_n, stored on blade {i, n}
        v[:, (1 << i) | (1 << (n - 1))] = -t[:, n - 1]
        out.append(Field(grid, v))
    return out


def _symmetric_product(zs: list[Field], idx: tuple[int, ...], grid: GridDomain) -> Field:
    perms = sorted(set(itertools.permutations(idx)))
    acc = Field.zeros(grid)
    for p in perms:
        term = Field.scalar(grid, 1.0)
        for i in p:
            term = term * zs[i]
        acc = acc + term
    return acc / len(perms)


def monogenic_candidates(grid: GridDomain, max_degree: int, quadrature: str = "product",
                         family: str = "fueter"):
    """Monogenic candidate fields with labels.

    ``fueter``: symmetrized products of Fueter variables times e_A on the
    right, which are exactly monogenic polynomials.  ``pi``: Pi[x^gamma e_A]
    = x^gamma e_A - T D (x^gamma e_A) for all monomials.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    cands, labels = [], []
    if family == "pi":
        for gamma in multi_indices(grid.n, max_degree):
            mono = _monomial(grid, gamma)
            for A in range(grid.blades):
                v = np.zeros((grid.size, grid.blades))
                v[:, A] = mono
                f = Field(grid, v)
                if sum(gamma) > 0:
                    f = f - teodorescu_apply(dirac_apply(f), quadrature)
                cands.append(f)
                labels.append(_gamma_label(gamma, A))
        return cands, labels
    if family != "fueter":
        raise ValueError(f"unknown candidate family {family!r}")
    zs = fueter_variables(grid)
    for k in range(max_degree + 1):
        for idx in itertools.combinations_with_replacement(range(grid.n - 1), k):
            base = _symmetric_product(zs, idx, grid)
            name = "*".join(f"z{i + 1}" for i in idx) or "1"
            for A in range(grid.blades):
                e = Field(grid, np.zeros((grid.size, grid.blades)))
                e.values[:, A] = 1.0
                cands.append(base * e)
                labels.append(f"V[{name}] e{A}")
    return cands, labels


def _system(grid, cands: list[Field], labels, kind, residual: Callable[[Field], float]) -> OrthonormalSystem:
    Q, kept, dropped = gram_schmidt(grid, [c.flat() for c in cands], labels)
    if Q.shape[1] == 0:
        raise EmptyBasisError("every candidate was dropped")
    res = np.array([residual(Field.from_flat(grid, Q[:, k])) for k in range(Q.shape[1])])
    Q.setflags(write=False)
    return OrthonormalSystem(grid, Q, tuple(kept), dropped, res, kind)


def monogenic_residual(w: Field, region="interior") -> float:
    mask = region_mask(w.grid, region)
    return dirac_apply(w).norm(mask) / max(w.norm(mask), 1e-300)


def monogenic_basis(grid: GridDomain, max_degree: int, quadrature: str = "product",
                    family: str = "fueter") -> OrthonormalSystem:
    cands, labels = monogenic_candidates(grid, max_degree, quadrature, family)
    return _system(grid, cands, labels, "monogenic", monogenic_residual)


def vekua_basis(prob: VekuaProblem, max_degree: int, method: str = "neumann", tol: float = 1e-12,
                family: str = "fueter") -> OrthonormalSystem:
    """Orthonormalized S^{-1} images of the monogenic candidates.

    ``method="factorized"`` is for alpha = 0, beta = grad g / g: then
    D - beta = g D g^{-1} and g times a monogenic field solves the equation
    exactly, without the Neumann series.
    """
    cands, labels = monogenic_candidates(prob.grid, max_degree, prob.quadrature, family)
    if prob.is_trivial():
        images, labs = cands, labels
    elif method == "neumann":
        images = [s_inverse_apply(c, prob, tol=tol) for c in cands]
        labs = [f"S^-1 {lab}" for lab in labels]
    elif method == "factorized":
        if prob.g is None or np.any(prob.alpha.values) or prob.mirrored:
            raise ValueError("the factorized construction needs alpha = 0 and beta = grad g / g")
        gv = prob.g.scalar_part()
        images = [c * gv for c in cands]
        labs = [f"g {lab}" for lab in labels]
    else:
        raise ValueError(f"unknown method {method!r}")
    kind = "monogenic" if prob.is_trivial() else "vekua"
    return _system(prob.grid, images, labs, kind, lambda f: vekua_residual(f, prob))


def project_bergman(w: Field, basis: OrthonormalSystem) -> Field:
    """P_Omega[w] = sum_k e_k <e_k, w>."""
    return basis.project(w)


# -- the three Vekua projections ---------------------------------------------

class VekuaSpaces:
    """Bases and assembled operators for one problem, built lazily and cached."""

    def __init__(self, prob: VekuaProblem, max_degree: int = 3, method: str = "neumann"):
        self.prob = prob
        self.grid = prob.grid
        self.max_degree = max_degree
        self.method = method
        self._monogenic: OrthonormalSystem | None = None
        self._vekua: OrthonormalSystem | None = None
        self._lu: dict[str, tuple] = {}
        self._cond: float | None = None

    @property
    def monogenic(self) -> OrthonormalSystem:
        if self._monogenic is None:
            self._monogenic = monogenic_basis(self.grid, self.max_degree, self.prob.quadrature)
        return self._monogenic

    @property
    def vekua(self) -> OrthonormalSystem:
        if self._vekua is None:
            if self.prob.is_trivial():
                self._vekua = self.monogenic
            else:
                self._vekua = vekua_basis(self.prob, self.max_degree, self.method)
        return self._vekua

    def mirror(self) -> VekuaSpaces:
        return VekuaSpaces(self.prob.mirror(), self.max_degree, self.method)

    # S and S* as dense LU factorizations
    def _factor(self, which: str):
        if which not in self._lu:
            S = self.prob.s_matrix()
            A = S.dense() if which == "S" else S.adjoint().dense()
            lu = la.lu_factor(A, check_finite=True)
            if which == "S":
                rcond, info = la.lapack.dgecon(lu[0], np.linalg.norm(A, 1), norm="1")
                self._cond = math.inf if rcond == 0 else 1.0 / rcond
            self._lu[which] = lu
        return self._lu[which]

    @property
    def condition(self) -> float:
        """1-norm condition estimate of the assembled S."""
        self._factor("S")
        return self._cond

    def _check_condition(self) -> None:
        if not self.condition < CONDITION_LIMIT:
            raise ConditioningError(f"S has condition ~{self.condition:.3g} > {CONDITION_LIMIT:g}")

    def solve_s(self, v: Field, adjoint: bool = False) -> Field:
        self._check_condition()
        lu = self._factor("S*" if adjoint else "S")
        return Field.from_flat(self.grid, la.lu_solve(lu, v.flat()))

    def apply_s(self, w: Field, adjoint: bool = False) -> Field:
        if not adjoint:
            return s_apply(w, self.prob)
        return self.prob.s_matrix().adjoint().apply(w)

    def project(self, w: Field, mode: str = "galerkin") -> Field:
        if w.grid != self.grid:
            raise GridMismatch("field and spaces live on different grids")
        if mode == "galerkin":
            return self.vekua.project(w)
        if self.prob.is_trivial():
            if mode not in PROJECTION_MODES:
                raise ValueError(f"unknown mode {mode!r}")
            return self.monogenic.project(w)
        if mode == "star":
            # S* P_Omega (S*)^{-1}
            return self.apply_s(self.monogenic.project(self.solve_s(w, adjoint=True)), adjoint=True)
        if mode == "conj":
            # S^{-1} P_Omega S
            return self.solve_s(self.monogenic.project(self.apply_s(w)))
        raise ValueError(f"unknown mode {mode!r}; choose from {PROJECTION_MODES}")

    def projection_matrix(self, mode: str = "galerkin") -> np.ndarray:
        """Dense matrix of a projection (columns are images of unit vectors)."""
        if mode == "galerkin":
            return self.vekua.matrix()
        P = self.monogenic.matrix()
        if self.prob.is_trivial():
            return P
        self._check_condition()
        S = self.prob.s_matrix()
        if mode == "star":
            Sa = S.adjoint().dense()
            return Sa @ la.lu_solve(self._factor("S*"), P.T, trans=1).T
        if mode == "conj":
            return la.lu_solve(self._factor("S"), P @ S.dense())
        raise ValueError(f"unknown mode {mode!r}; choose from {PROJECTION_MODES}")


def _spaces(prob_or_spaces, max_degree: int) -> VekuaSpaces:
    if isinstance(prob_or_spaces, VekuaSpaces):
        return prob_or_spaces
    prob = prob_or_spaces
    key = ("spaces", max_degree)
    if key not in prob._cache:
        prob._cache[key] = VekuaSpaces(prob, max_degree)
    return prob._cache[key]


def project_vekua(w: Field, prob: VekuaProblem | VekuaSpaces, mode: str = "galerkin", max_degree: int = 3) -> Field:
    """Vekua projection by Galerkin, S* P (S*)^{-1} (``star``) or S^{-1} P S (``conj``)."""
    return _spaces(prob, max_degree).project(w, mode)


# -- Hodge split --------------------------------------------------------------

@dataclass
class HodgeSplit:
    p: Field
    q: Field
    orthogonality: float          # |<p,q>| / (|p| |q|)
    pythagoras: float             # | |w|^2 - |p|^2 - |q|^2 | / |w|^2
    vekua_residual: float         # of p
    membership: float             # LS distance of q to the complement proxy, relative to |q|
    test_count: int
    extra: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {
            "norm_p": self.p.norm(),
            "norm_q": self.q.norm(),
            "orthogonality": self.orthogonality,
            "pythagoras": self.pythagoras,
            "vekua_residual_p": self.vekua_residual,
            "complement_membership": self.membership,
            "test_count": self.test_count,
        }
        rec.update(self.extra)
        return rec


def complement_images(prob: VekuaProblem, tests: TestFunctionSystem) -> np.ndarray:
    """Columns (D - M^alpha C - conj(beta)) phi (or the unmirrored operator for a mirrored problem)."""
    if prob.mirrored:
        op = vekua_operator(prob.alpha, prob.beta)
    else:
        op = adjoint_vekua_operator(prob.alpha, prob.beta)
    return np.asarray(op.matrix @ tests.matrix())


def span_distance(v: Field, B: np.ndarray) -> float:
    """min_c |v - B c| / |v| in the weighted norm."""
    nv = v.norm()
    if nv == 0.0 or B.shape[1] == 0:
        return 0.0 if nv == 0.0 else 1.0
    s = np.sqrt(_wvec(v.grid))
    c, *_ = np.linalg.lstsq(B * s[:, None], v.flat() * s, rcond=None)
    return Field.from_flat(v.grid, v.flat() - B @ c).norm() / nv


def _split(w: Field, spaces: VekuaSpaces, test_count: int, tests: TestFunctionSystem | None) -> HodgeSplit:
    p = spaces.project(w, "galerkin")
    q = w - p
    np_, nq, nw = p.norm(), q.norm(), w.norm()
    orth = abs(scalar_product(p, q)) / (np_ * nq) if np_ > 0 and nq > 0 else 0.0
    pyth = abs(nw ** 2 - np_ ** 2 - nq ** 2) / nw ** 2 if nw > 0 else 0.0
    if tests is None:
        tests = test_function_basis(spaces.grid, test_count, blades=range(spaces.grid.blades))
    B = complement_images(spaces.prob, tests)
    res_p = vekua_residual(p, spaces.prob) if np_ > 0 else 0.0
    return HodgeSplit(p, q, orth, pyth, res_p, span_distance(q, B), len(tests))


def hodge_split(w: Field, prob: VekuaProblem | VekuaSpaces, test_count: int = 40,
                tests: TestFunctionSystem | None = None, max_degree: int = 3) -> HodgeSplit:
    """w = p + q with p in the Vekua span and q orthogonal to it."""
    return _split(w, _spaces(prob, max_degree), test_count, tests)


def adjoint_hodge_split(w: Field, prob: VekuaProblem | VekuaSpaces, test_count: int = 40,
                        tests: TestFunctionSystem | None = None, max_degree: int = 3) -> HodgeSplit:
    """Mirror of hodge_split: kernel side Dw = conj(w) alpha + conj(beta) w."""
    spaces = _spaces(prob, max_degree)
    return _split(w, spaces.mirror(), test_count, tests)


def adjoint_identity_residual(w: Field, phi: Field, prob: VekuaProblem) -> float:
    """|<w, (D - M^a C - conj b) phi> - <(D - a C - b) w, phi>| / (|w| |phi|)."""
    if w.grid != phi.grid or w.grid != prob.grid:
        raise GridMismatch("fields live on different grids")
    if np.any(phi.values[phi.grid.boundary_mask] != 0.0):
        raise ValueError("phi must vanish on the boundary")
    lhs = scalar_product(w, adjoint_vekua_operator(prob.alpha, prob.beta).apply(phi))
    rhs = scalar_product(vekua_operator(prob.alpha, prob.beta).apply(w), phi)
    return abs(lhs - rhs) / (w.norm() * phi.norm())


def subspace_angle(A: np.ndarray, B: np.ndarray, grid: GridDomain) -> float:
    """Largest principal angle between column spans, weighted geometry (radians)."""
    s = np.sqrt(_wvec(grid))[:, None]
    return float(np.max(la.subspace_angles(A * s, B * s)))


def star_complement_images(prob: VekuaProblem, tests: TestFunctionSystem) -> np.ndarray:
    """Columns S* D phi."""
    Sa = prob.s_matrix().adjoint()
    return np.asarray(Sa.matrix @ (dirac_operator(prob.grid).matrix @ tests.matrix()))
