"""Invariant suites: each check yields a pass/fail record, refinement studies
also yield convergence rows.

Every suite draws its randomness from a child of one seeded generator, so a
report is reproducible from (config, seed).
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import clifford as cl
from .domain import Field, GridDomain, bubble, scalar_product, test_function_basis
from .expressions import evaluate, field_from_spec
from .factorization import (
    PotentialSpec,
    factorization_residual,
    full_factorization_residual,
    potential_from_fg,
    schrodinger_potential_fg,
)
from .hodge import (
    VekuaSpaces,
    adjoint_identity_residual,
    complement_images,
    monogenic_basis,
    span_distance,
    vekua_basis,
)
from .kernels import kernel_projection, kernel_symmetry_residual, reproduce_component, trivial_beta_residual
from .operators import (
    dirac_apply,
    laplacian,
    operator_norm,
    s_operator,
    teodorescu_apply,
    teodorescu_operator,
)
from .vekua import (
    VekuaProblem,
    beltrami_residual,
    beltrami_transform,
    conductivity_residual,
    make_vekua_solution,
    s_apply,
    s_inverse_apply,
    schrodinger_residual,
    vekua_residual,
)

SUITES = ("algebra", "calculus", "vekua", "hodge", "kernels", "factorization")


# -- records ------------------------------------------------------------------

@dataclass
class Check:
    name: str
    suite: str
    anchor: str
    value: float
    tolerance: float | list[float]
    comparison: str               # "<=", ">=", "within", "decreasing", "report"
    passed: bool | None           # None for diagnostics that are reported only
    runtime_s: float = 0.0
    detail: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["value"] = _clean(self.value)
        rec["detail"] = {k: _clean(v) for k, v in self.detail.items()}
        return rec

    def line(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "INFO"}[self.passed]
        return f"{status} {self.suite}.{self.name}: value={_fmt(self.value)} {self.comparison} {_fmt(self.tolerance)}"


@dataclass
class ConvergenceRow:
    check: str
    m: int
    h: float
    residual: float
    order: float | None


def _clean(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_clean(t) for t in v]
    if isinstance(v, np.ndarray):
        return [_clean(t) for t in v.tolist()]
    return v


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(t) for t in v) + "]"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.3g}"
    return str(v)


def fit_order(hs: Iterable[float], residuals: Iterable[float]) -> float:
    """Least-squares slope of log(residual) against log(h)."""
    hs = np.log(np.asarray(list(hs), dtype=float))
    rs = np.asarray(list(residuals), dtype=float)
    if np.any(rs <= 0) or len(rs) < 2:
        return float("nan")
    return float(np.polyfit(hs, np.log(rs), 1)[0])


class Recorder:
    def __init__(self, suite: str):
        self.suite = suite
        self.checks: list[Check] = []
        self.rows: list[ConvergenceRow] = []
        self._t = time.perf_counter()

    def _elapsed(self) -> float:
        now = time.perf_counter()
        dt, self._t = now - self._t, now
        return dt

    def upper(self, name, anchor, value, tol, **detail) -> Check:
        return self._add(name, anchor, value, tol, "<=", bool(value <= tol), detail)

    def lower(self, name, anchor, value, tol, **detail) -> Check:
        return self._add(name, anchor, value, tol, ">=", bool(value >= tol), detail)

    def within(self, name, anchor, value, lo, hi, **detail) -> Check:
        return self._add(name, anchor, value, [lo, hi], "within", bool(lo <= value <= hi), detail)

    def report(self, name, anchor, value, reference=float("nan"), **detail) -> Check:
        return self._add(name, anchor, value, reference, "report", None, detail)

    def _add(self, name, anchor, value, tol, comparison, passed, detail) -> Check:
        if isinstance(value, float) and math.isnan(value):
            passed = False if passed is not None else None
        c = Check(name, self.suite, anchor, float(value), tol, comparison, passed, self._elapsed(), detail)
        self.checks.append(c)
        return c

    def convergence(self, name: str, ms: list[int], hs: list[float], rs: list[float]) -> float:
        order = fit_order(hs, rs)
        for m, h, r in zip(ms, hs, rs):
            self.rows.append(ConvergenceRow(f"{self.suite}.{name}", m, h, float(r), order))
        return order


# -- configuration ------------------------------------------------------------

class ConfigError(ValueError):
    pass


DEFAULT_TOLERANCES = {
    "algebra_exact": 1e-12,
    "algebra_runtime_s": 5.0,
    "calculus_order_min": 1.5,
    "calculus_finest": 5e-2,
    "calculus_runtime_s": 60.0,
    "order_target": 2.0,
    "order_slack": 0.3,
    "assemble_exact": 1e-12,
    "adjoint_exact": 1e-10,
    "tnorm_margin": 0.1,
    "neumann_tol": 1e-12,
    "orthogonality": 1e-10,
    "pythagoras": 1e-9,
    "membership_noise": 0.05,
    "projection_exact": 1e-9,
    "reproduction_factor": 10.0,
    "kernel_projection": 1e-8,
    "kernel_symmetry": 1e-10,
    "kernel_reproduction": 1e-8,
    "trivial_beta": 1e-6,
    "negative_ratio": 10.0,
    "bergman_kill": 0.1,
    "commutation": 1e-9,
    "full_runtime_s": 600.0,
}


@dataclass
class SuiteConfig:
    n: int = 2
    grids: list[int] = field(default_factory=lambda: [9, 17, 33])
    adjoint_grids: list[int] = field(default_factory=lambda: [33, 65, 129])
    box: list[list[float]] | None = None
    seed: int = 0
    suites: list[str] = field(default_factory=lambda: list(SUITES))
    max_degree: int = 3
    test_counts: list[int] = field(default_factory=lambda: [10, 20, 30, 40])
    potential: dict = field(default_factory=lambda: {"f": "exp(x1)"})
    generic: dict = field(default_factory=lambda: {
        "alpha": {"e1": "0.5 + 0.4*x2", "e2": "0.3*x1"},
        "beta": {"1": "0.2 + 0.4*x1", "e12": "0.3*x2"},
    })
    fg: dict = field(default_factory=lambda: {"f": "exp(0.6*x1*x1 + 0.4*x2)", "g": "1 + 0.3*x1*x2 + 0.2*x2"})
    trivial_beta_g: str = "exp(0.5*x1 + 0.3*x2*x2)"
    random_fields: int = 10
    splits: int = 20
    target: dict | str = field(default_factory=lambda: {"1": "exp(x1)*(1 + x2)", "e1": "x1*x2", "e2": "0.5 - x2",
                                                       "e12": "exp(-r2 / 0.02)"})
    kernel: dict = field(default_factory=lambda: {"blade": 0, "point": None})   # None: box center
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.box is None:
            self.box = [[-0.25, 0.25]] * self.n
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.n, int) or not 2 <= self.n <= cl.MAX_DIMENSION:
            raise ConfigError(f"n must be an integer in [2, {cl.MAX_DIMENSION}]")
        for name, gs in (("grids", self.grids), ("adjoint_grids", self.adjoint_grids)):
            if len(gs) < 2 or any(int(m) != m or m < 5 for m in gs):
                raise ConfigError(f"{name} must list at least two sizes >= 5")
            if any(b <= a for a, b in zip(gs, gs[1:])):
                raise ConfigError(f"{name}: grid sizes must be strictly increasing")
        if len(self.box) != self.n or any(len(b) != 2 or b[1] <= b[0] for b in self.box):
            raise ConfigError("box must give [low, high] with low < high for every axis")
        bad = set(self.suites) - set(SUITES)
        if bad:
            raise ConfigError(f"unknown suites {sorted(bad)}")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerances {sorted(unknown)}")
        if any(not (isinstance(v, (int, float)) and v > 0) for v in self.tolerances.values()):
            raise ConfigError("tolerances must be positive numbers")
        if self.max_degree < 0:
            raise ConfigError("max_degree must be >= 0")
        if any(b <= a for a, b in zip(self.test_counts, self.test_counts[1:])):
            raise ConfigError("test_counts must be strictly increasing")
        if not 0 <= int(self.kernel.get("blade", 0)) < (1 << self.n):
            raise ConfigError("kernel blade out of range")
        if self.kernel.get("point") is not None and len(self.kernel["point"]) != self.n:
            raise ConfigError("kernel point needs n coordinates")
        if self.random_fields < 1 or self.splits < 1:
            raise ConfigError("random_fields and splits must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> SuiteConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def grid(self, m: int, n: int | None = None) -> GridDomain:
        n = self.n if n is None else n
        box = self.box if n == self.n else [self.box[0]] * n
        return GridDomain(n, m, [tuple(b) for b in box])

    def to_dict(self) -> dict:
        return asdict(self)


# -- helpers ------------------------------------------------------------------

def smooth_random(rng: np.random.Generator, n: int, blades: int, width: float, modes: int = 3) -> Callable:
    """A random trigonometric multivector function; the same function on every grid."""
    k = rng.uniform(-1.0, 1.0, (blades, modes, n)) * math.pi / width
    phase = rng.uniform(0.0, 2 * math.pi, (blades, modes))
    amp = rng.standard_normal((blades, modes))

    def fn(x: np.ndarray) -> np.ndarray:
        return np.stack([(amp[b] * np.cos(x @ k[b].T + phase[b])).sum(axis=1) for b in range(blades)], axis=1)

    return fn


def _field(fn: Callable, grid: GridDomain) -> Field:
    return Field(grid, fn(grid.points))


def _width(cfg: SuiteConfig) -> float:
    return min(b[1] - b[0] for b in cfg.box)


def _problem_from(spec: dict, grid: GridDomain) -> VekuaProblem:
    if "f" in spec or "g" in spec:
        f = Field.scalar(grid, evaluate(spec["f"], grid)) if "f" in spec else None
        g = Field.scalar(grid, evaluate(spec["g"], grid)) if "g" in spec else None
        return VekuaProblem.from_fg(f, g)
    alpha = field_from_spec(spec.get("alpha", 0.0), grid)
    beta = field_from_spec(spec.get("beta", 0.0), grid)
    return VekuaProblem(grid, alpha, beta)


def compact_mask(grid: GridDomain, fraction: float = 0.5) -> np.ndarray:
    """Points in the centered sub-box whose sides are ``fraction`` of the box sides."""
    lo = np.array([b[0] for b in grid.box])
    hi = np.array([b[1] for b in grid.box])
    c, r = (lo + hi) / 2, fraction * (hi - lo) / 2
    return np.all(np.abs(grid.points - c) <= r + 1e-12 * (hi - lo), axis=1)


def monogenic_seeds(grid: GridDomain) -> dict[str, Field]:
    """1, x1 e2 + x2 e1 and x1 - x2 e12 (coordinates centered on the box)."""
    lo = np.array([b[0] for b in grid.box])
    hi = np.array([b[1] for b in grid.box])
    x = grid.points - (lo + hi) / 2
    one = Field.scalar(grid, 1.0)
    v = np.zeros((grid.size, grid.blades))
    v[:, 2] = x[:, 0]
    v[:, 1] = x[:, 1]
    z = np.zeros((grid.size, grid.blades))
    z[:, 0] = x[:, 0]
    z[:, 3] = -x[:, 1]
    return {"one": one, "x1e2+x2e1": Field(grid, v), "x1-x2e12": Field(grid, z)}


# -- suites -------------------------------------------------------------------

def suite_algebra(cfg: SuiteConfig, rng: np.random.Generator) -> Recorder:
    rec = Recorder("algebra")
    t0 = time.perf_counter()
    tol = cfg.tol("algebra_exact")
    worst_rel = worst_conj = worst_sq = 0.0
    for n in range(1, cl.MAX_DIMENSION + 1):
        tab = cl.blade_table(n)
        for i in range(n):
            for j in range(n):
                ei, ej = cl.Multivector.blade(n, 1 << i), cl.Multivector.blade(n, 1 << j)
                anti = ei * ej + ej * ei
                target = cl.Multivector.scalar(-2.0 if i == j else 0.0, n)
                worst_rel = max(worst_rel, float(np.abs((anti - target).coeffs).max()))
        for B in range(1 << n):
            k = cl.popcount(B)
            e = cl.Multivector.blade(n, B)
            expected = (-1) ** (k * (k + 1) // 2)
            worst_conj = max(worst_conj, float(np.abs((e.conj() - e * expected).coeffs).max()))
            worst_sq = max(worst_sq, abs((e * e)[0] - expected), float(np.abs((e * e).coeffs[1:]).max(initial=0.0)))
            worst_sq = max(worst_sq, abs(tab.conj_sign[B] * (e * e)[0] - 1.0))
    rec.upper("defining_relation", "e_i e_j + e_j e_i = -2 delta_ij", worst_rel, tol)
    rec.upper("conjugation_sign_law", "conj(e_B) = (-1)^{|B|(|B|+1)/2} e_B", worst_conj, tol)
    rec.upper("blade_square_law", "e_B^2 = (-1)^{|B|(|B|+1)/2}", worst_sq, tol)
    worst_dot = worst_assoc = worst_anti = worst_swap = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, cl.MAX_DIMENSION + 1))
        u, v, w = (cl.Multivector(rng.standard_normal(1 << n)) for _ in range(3))
        scale = 1.0 + float(np.abs(u.coeffs).sum() * np.abs(v.coeffs).sum())
        worst_dot = max(worst_dot, abs(cl.scalar_part(u.conj() * v) - float(u.coeffs @ v.coeffs)) / scale)
        worst_swap = max(worst_swap, abs(cl.scalar_part(u.conj() * v) - cl.scalar_part(u * v.conj())) / scale)
        worst_assoc = max(worst_assoc, float(np.abs(((u * v) * w - u * (v * w)).coeffs).max()) / (scale * (1 + np.abs(w.coeffs).sum())))
        worst_anti = max(worst_anti, float(np.abs(((u * v).conj() - v.conj() * u.conj()).coeffs).max()) / scale)
    rec.upper("scalar_part_dot", "Sc(conj(u) v) = sum_B u_B v_B", worst_dot, tol)
    rec.upper("scalar_part_swap", "Sc(conj(a) b) = Sc(a conj(b))", worst_swap, tol)
    rec.upper("associativity", "a(bc) = (ab)c", worst_assoc, tol)
    rec.upper("conjugation_antiautomorphism", "conj(ab) = conj(b) conj(a)", worst_anti, tol)
    rec.upper("runtime", "desk-scale algebra", time.perf_counter() - t0, cfg.tol("algebra_runtime_s"))
    return rec


def suite_calculus(cfg: SuiteConfig, rng: np.random.Generator) -> Recorder:
    rec = Recorder("calculus")
    t0 = time.perf_counter()
    ms = cfg.grids
    grids = [cfg.grid(m) for m in ms]
    hs = [g.h[0] for g in grids]
    fns = [smooth_random(rng, cfg.n, 1 << cfg.n, _width(cfg)) for _ in range(3)]
    orders, finest, compact_orders = [], [], []
    for k, fn in enumerate(fns):
        res, res_c = [], []
        for g in grids:
            w = _field(fn, g)
            r = dirac_apply(teodorescu_apply(w)) - w
            res.append(r.norm(g.interior_mask) / w.norm(g.interior_mask))
            cm = compact_mask(g)
            res_c.append(r.norm(cm) / w.norm(cm))
        orders.append(rec.convergence(f"dt_identity_{k}", ms, hs, res))
        compact_orders.append(rec.convergence(f"dt_identity_compact_{k}", ms, hs, res_c))
        finest.append(res[-1])
    rec.lower("dt_identity_order", "D T = I on interior points", min(orders), cfg.tol("calculus_order_min"),
              orders=orders)
    rec.upper("dt_identity_finest", "D T = I on interior points", max(finest), cfg.tol("calculus_finest"),
              residuals=finest)
    rec.report("dt_identity_compact_order", "D T = I on the centered half-size sub-box", min(compact_orders),
               orders=compact_orders)
    # D^2 = -Laplace on smooth scalars
    h_fn = smooth_random(rng, cfg.n, 1, _width(cfg))
    res = []
    for g in grids:
        u = h_fn(g.points)[:, 0]
        DD = dirac_apply(dirac_apply(Field.scalar(g, u))).scalar_part()
        mask = g.inner_mask(2)
        res.append(math.sqrt(float((g.weights * mask * (DD + laplacian(g, u)) ** 2).sum())
                             / (g.weights * mask * u ** 2).sum()))
    order = rec.convergence("d_squared", ms, hs, res)
    rec.within("d_squared_order", "Laplace = -D^2", order, 2 - cfg.tol("order_slack"), 2 + cfg.tol("order_slack"))
    # assembly and adjoint consistency on the coarsest grid
    g = grids[0]
    prob = _problem_from(cfg.generic, g)
    S = s_operator(prob.alpha, prob.beta)
    w = _field(smooth_random(rng, cfg.n, g.blades, _width(cfg)), g)
    v = _field(smooth_random(rng, cfg.n, g.blades, _width(cfg)), g)
    direct = s_apply(w, prob)
    rec.upper("assemble_exact", "assembled S matches direct application",
              (S.apply(w) - direct).norm() / direct.norm(), cfg.tol("assemble_exact"))
    lhs, rhs = scalar_product(S.apply(w), v), scalar_product(w, S.adjoint().apply(v))
    rec.upper("adjoint_exact", "<S u, v> = <u, S* v>", abs(lhs - rhs) / (w.norm() * v.norm()), cfg.tol("adjoint_exact"))
    # |T| against diam: reported only
    for gg in grids[:2]:
        tn = operator_norm(teodorescu_operator(gg))
        rec.report(f"teodorescu_norm_m{gg.m}", "|T| <= diam", tn / gg.diam,
                   reference=1 + cfg.tol("tnorm_margin"), diam=gg.diam, norm=tn)
    rec.upper("runtime", "calculus suite", time.perf_counter() - t0, cfg.tol("calculus_runtime_s"))
    return rec


def _order_check(rec: Recorder, cfg: SuiteConfig, name: str, anchor: str, ms, hs, rs, **detail) -> float:
    order = rec.convergence(name, ms, hs, rs)
    s = cfg.tol("order_slack")
    rec.within(f"{name}_order", anchor, order, cfg.tol("order_target") - s, cfg.tol("order_target") + s,
               residuals=rs, **detail)
    return order


def suite_vekua(cfg: SuiteConfig, rng: np.random.Generator) -> Recorder:
    rec = Recorder("vekua")
    ms = cfg.grids
    grids = [cfg.grid(m) for m in ms]
    hs = [g.h[0] for g in grids]
    probs = [_problem_from(cfg.potential, g) for g in grids]
    qs = [p.q for p in probs]
    rec.upper("contraction_bound", "q = (|a| + |b|) diam < 1", max(qs), 1.0 - 1e-12)
    rec.report("measured_contraction_norm", "|I - S| measured vs the bound q", probs[0].measured_q(),
               reference=qs[0])
    # |alpha|_inf for f = exp(|x|^2 / (2 d^2)): compare with sup|x| / d^2 and with 1 / d
    g = grids[-1]
    d = g.diam
    gauss = VekuaProblem.from_fg(Field.scalar(g, np.exp((g.points ** 2).sum(axis=1) / (2 * d * d))))
    rec.report("gaussian_alpha_sup", "|alpha|_inf for f = exp(|x|^2 / 2 diam^2)", gauss.alpha_sup,
               reference=1.0 / d, sup_x_over_d2=float(np.sqrt((g.points ** 2).sum(axis=1)).max() / d ** 2))
    if max(qs) >= 1.0:
        return rec
    # exact solution w = f
    if probs[0].f is not None:
        rs = [vekua_residual(p.f, p) for p in probs]
        _order_check(rec, cfg, "exact_solution", "f solves Dw = (grad f / f) conj(w)", ms, hs, rs)
    # S^{-1} of monogenic seeds
    seed_orders, compact_orders = {}, {}
    for name in monogenic_seeds(grids[0]):
        rs, rc = [], []
        for g, p in zip(grids, probs):
            w = make_vekua_solution(monogenic_seeds(g)[name], p, tol=cfg.tol("neumann_tol"))
            rs.append(vekua_residual(w, p))
            rc.append(vekua_residual(w, p, compact_mask(g)))
        seed_orders[name] = _order_check(rec, cfg, f"seed_{name}", "S^{-1} sends monogenic fields to solutions",
                                         ms, hs, rs)
        compact_orders[name] = rec.convergence(f"seed_{name}_compact", ms, hs, rc)
    rec.report("seed_compact_order", "seed residual order on the centered half-size sub-box",
               min(compact_orders.values()), orders=list(compact_orders.values()))
    # round trip and iteration count on the finest grid
    g, p = grids[-1], probs[-1]
    v = _field(smooth_random(rng, cfg.n, g.blades, _width(cfg)), g)
    tol = 1e-10
    out = s_inverse_apply(v, p, tol=tol, full_output=True)
    rt = (s_apply(out.field, p) - v).norm() / v.norm()
    rec.upper("round_trip", "S S^{-1} = I", rt, tol * (1 + p.q) / (1 - p.q))
    qd = out.measured_contraction
    bound = math.ceil(math.log(tol) / math.log(qd)) + 1 if 0 < qd < 1 else out.iterations
    rec.upper("iteration_count", "Neumann iterations vs measured contraction", out.iterations, bound,
              measured_contraction=qd)
    # negative control: right multiplication by e1 leaves the solution set
    if p.f is not None:
        e1 = cl.Multivector.blade(cfg.n, 1)
        base = vekua_residual(p.f, p)
        moved = vekua_residual(p.f * e1, p)
        rec.lower("right_multiplication_breaks", "solutions form a real, not Clifford, module", moved / base,
                  cfg.tol("negative_ratio"), base=base, moved=moved)
    # Beltrami, conductivity and Schrodinger equivalences
    bel, con, sch = [], [], []
    for g in grids:
        fv = Field.scalar(g, evaluate(cfg.fg["f"], g))
        gv = Field.scalar(g, evaluate(cfg.fg["g"], g))
        pf = VekuaProblem.from_fg(fv, gv)
        if pf.q >= 1.0:
            rec.upper("fg_contraction", "q < 1 for the f, g pair", pf.q, 1.0)
            return rec
        w = make_vekua_solution(monogenic_seeds(g)["x1e2+x2e1"] + 1.0, pf, tol=cfg.tol("neumann_tol"))
        cm = compact_mask(g)
        bel.append(beltrami_residual(beltrami_transform(w, fv, gv), fv, cm))
        con.append(conductivity_residual(w, fv, gv, cm))
        sch.append(schrodinger_residual(w, fv, gv, cm))
    for name, rs in (("beltrami", bel), ("conductivity", con), ("schrodinger", sch)):
        _order_check(rec, cfg, name, f"{name} form of a Vekua solution (centered half-size sub-box)", ms, hs, rs)
    return rec


def suite_hodge(cfg: SuiteConfig, rng: np.random.Generator) -> Recorder:
    rec = Recorder("hodge")
    ms = cfg.grids
    grids = [cfg.grid(m) for m in ms]
    hs = [g.h[0] for g in grids]
    g = grids[-1]
    prob = _problem_from(cfg.generic, g)
    spaces = VekuaSpaces(prob, cfg.max_degree)
    width = _width(cfg)
    # orthogonality and Pythagoras on random splits
    tests = test_function_basis(g, max(cfg.test_counts), blades=range(g.blades))
    B = complement_images(prob, tests)
    worst_o = worst_p = 0.0
    memberships = []
    for k in range(cfg.splits):
        w = _field(smooth_random(rng, cfg.n, g.blades, width), g)
        p = spaces.project(w)
        q = w - p
        worst_o = max(worst_o, abs(scalar_product(p, q)) / (p.norm() * q.norm()))
        worst_p = max(worst_p, abs(w.norm() ** 2 - p.norm() ** 2 - q.norm() ** 2) / w.norm() ** 2)
        if k < 5:
            memberships.append([span_distance(q, B[:, :c]) for c in cfg.test_counts])
    rec.upper("orthogonality", "<p, q> = 0", worst_o, cfg.tol("orthogonality"))
    rec.upper("pythagoras", "|w|^2 = |p|^2 + |q|^2", worst_p, cfg.tol("pythagoras"))
    noise = cfg.tol("membership_noise")
    mono = all(b <= a * (1 + noise) for row in memberships for a, b in zip(row, row[1:]))
    rec._add("complement_membership_decreasing", "q approaches (D - M^a C - conj b) W0",
             float(max(row[-1] for row in memberships)), list(cfg.test_counts), "decreasing", mono,
             {"rows": memberships})
    # adjoint identity order, fitted on the finer hierarchy; the coarse fit is reported
    fine = [cfg.grid(m) for m in cfg.adjoint_grids]
    orders, coarse = [], []
    for k in range(cfg.random_fields):
        wf = smooth_random(rng, cfg.n, g.blades, width)
        pf = smooth_random(rng, cfg.n, g.blades, width)
        rs = {}
        for gg in sorted(set(grids + fine), key=lambda t: t.m):
            pr = _problem_from(cfg.generic, gg)
            phi = Field(gg, pf(gg.points) * bubble(gg)[:, None])
            rs[gg.m] = adjoint_identity_residual(_field(wf, gg), phi, pr)
        orders.append(rec.convergence(f"adjoint_identity_{k}", cfg.adjoint_grids, [t.h[0] for t in fine],
                                      [rs[m] for m in cfg.adjoint_grids]))
        coarse.append(fit_order(hs, [rs[m] for m in ms]))
    s = cfg.tol("order_slack")
    rec.within("adjoint_identity_order_min", "Gauss theorem for the Vekua pair", min(orders), 2 - s, 2 + s,
               orders=orders, grids=list(cfg.adjoint_grids))
    rec.within("adjoint_identity_order_max", "Gauss theorem for the Vekua pair", max(orders), 2 - s, 2 + s,
               orders=orders, grids=list(cfg.adjoint_grids))
    rec.report("adjoint_identity_coarse_order_min", "same pairs fitted on the main grids", min(coarse),
               reference=2.0, orders=coarse, pairs_in_window=sum(2 - s <= o <= 2 + s for o in coarse))
    # Galerkin projection: idempotent and self-adjoint
    P = spaces.projection_matrix("galerkin")
    wv = np.repeat(g.weights, g.blades)
    idem = float(np.abs(P @ P - P).max())
    sa = float(np.abs(wv[:, None] * P - (wv[:, None] * P).T).max() / wv.max())
    rec.upper("galerkin_idempotent", "P P = P", idem, cfg.tol("projection_exact"))
    rec.upper("galerkin_self_adjoint", "<P u, v> = <u, P v>", sa, cfg.tol("projection_exact"))
    # invariance formula on span members
    V = spaces.vekua
    worst_inv = 0.0
    for k in range(min(5, len(V))):
        v = _field(smooth_random(rng, cfg.n, g.blades, width), g)
        worst_inv = max(worst_inv, abs(scalar_product(V[k], v) - scalar_product(V[k], spaces.project(v))) / v.norm())
    rec.upper("invariance_formula", "<w, v> = <w, P v> for w in the span", worst_inv, cfg.tol("pythagoras"))
    # star and conj reproduce span members
    factor = cfg.tol("reproduction_factor")
    for mode in ("star", "conj"):
        ratios = []
        for k in range(len(V)):
            u = V[k]
            r = (spaces.project(u, mode) - u).norm()
            ratios.append(r / (factor * max(V.residuals[k], 1e-300)))
        rec.upper(f"{mode}_reproduces_members", f"{mode} form fixes the Vekua span",
                  max(ratios), 1.0, note="value = max residual / (factor x member build residual)")
    # an estimate; the trailing digits depend on BLAS memory alignment
    rec.report("condition_S", "1-norm condition estimate of S", float(f"{spaces.condition:.6g}"))
    # star vs conj under refinement
    diffs = []
    for gg in grids:
        sp = VekuaSpaces(_problem_from(cfg.generic, gg), cfg.max_degree)
        probe_rng = np.random.default_rng(cfg.seed + 7)
        worst = 0.0
        for _ in range(5):
            w = Field(gg, probe_rng.standard_normal((gg.size, gg.blades)))
            worst = max(worst, (sp.project(w, "star") - sp.project(w, "conj")).norm() / w.norm())
        diffs.append(worst)
    rec.convergence("star_minus_conj", ms, hs, diffs)
    dec = all(b < a for a, b in zip(diffs, diffs[1:]))
    rec._add("star_conj_agreement", "star and conj forms agree in the limit", diffs[-1], diffs[0], "decreasing", dec,
             {"differences": diffs})
    # Bergman projection kills D-images of bumps; commutes with right blades
    M = spaces.monogenic
    bumps = test_function_basis(g, 1, profile="bump")
    Dphi = dirac_apply(bumps[0])
    rec.upper("bergman_kills_d_images", "P_Omega D W0 = 0", M.project(Dphi).norm() / Dphi.norm(),
              cfg.tol("bergman_kill"), degree=cfg.max_degree)
    w = _field(smooth_random(rng, cfg.n, g.blades, width), g)
    worst_c = 0.0
    for A in range(1, g.blades):
        e = cl.Multivector.blade(cfg.n, A)
        worst_c = max(worst_c, (M.project(w * e) - M.project(w) * e).norm() / w.norm())
    rec.upper("bergman_right_module", "P_Omega[w e_A] = P_Omega[w] e_A", worst_c, cfg.tol("commutation"))
    e1 = cl.Multivector.blade(cfg.n, 1)
    gap = (spaces.project(w * e1) - spaces.project(w) * e1).norm() / w.norm()
    rec.lower("vekua_not_right_module", "P_ab[w e1] != P_ab[w] e1 when alpha != 0", gap / cfg.tol("commutation"),
              cfg.tol("negative_ratio"), gap=gap)
    leave = max(span_distance(V[k] * e1, V.Q) for k in range(min(4, len(V))))
    rec.lower("span_not_right_module", "w e1 leaves the Vekua span", leave / cfg.tol("commutation"),
              cfg.tol("negative_ratio"), distance=leave)
    # adjoint-side split and the complement cross-check
    mirror = spaces.mirror()
    worst_o = 0.0
    for _ in range(3):
        w = _field(smooth_random(rng, cfg.n, g.blades, width), g)
        p = mirror.project(w)
        q = w - p
        worst_o = max(worst_o, abs(scalar_product(p, q)) / (p.norm() * q.norm()))
    rec.upper("adjoint_split_orthogonality", "mirrored decomposition", worst_o, cfg.tol("orthogonality"))
    return rec


def suite_kernels(cfg: SuiteConfig, rng: np.random.Generator) -> Recorder:
    rec = Recorder("kernels")
    g = cfg.grid(cfg.grids[min(1, len(cfg.grids) - 1)])
    prob = _problem_from(cfg.generic, g)
    V = VekuaSpaces(prob, cfg.max_degree).vekua
    width = _width(cfg)
    worst = 0.0
    for _ in range(cfg.random_fields):
        w = _field(smooth_random(rng, cfg.n, g.blades, width), g)
        a, b = kernel_projection(w, V), V.project(w)
        worst = max(worst, (a - b).norm() / b.norm())
    rec.upper("kernel_projection", "kernel form equals the Vekua projection", worst, cfg.tol("kernel_projection"))
    pairs = list(zip(rng.integers(0, g.size, 50), rng.integers(0, g.size, 50)))
    sym = max(kernel_symmetry_residual(A, B, V, pairs) for A in range(g.blades) for B in range(g.blades))
    rec.upper("kernel_symmetry", "[K^A]_B(x,y) = [K^B]_A(y,x)", sym, cfg.tol("kernel_symmetry"))
    worst = 0.0
    for j in range(min(6, len(V))):
        for x in rng.integers(0, g.size, 5):
            for A in range(g.blades):
                worst = max(worst, abs(reproduce_component(V[j], A, int(x), V) - V[j].values[int(x), A]))
    rec.upper("kernel_reproduction", "<K^A(x,.), w> = w_A(x) on the span", worst, cfg.tol("kernel_reproduction"))
    # trivial beta: alpha = 0, beta = grad g / g
    gv = Field.scalar(g, evaluate(cfg.trivial_beta_g, g))
    pt = VekuaProblem.from_fg(None, gv)
    Vf = vekua_basis(pt, cfg.max_degree, method="factorized")
    M = monogenic_basis(g, cfg.max_degree)
    worst = 0.0
    for _ in range(cfg.random_fields):
        w = _field(smooth_random(rng, cfg.n, g.blades, width), g)
        worst = max(worst, trivial_beta_residual(w, Vf, M, gv))
    rec.upper("trivial_beta_random", "P = g P_Omega g^{-1} for alpha = 0, beta = grad g / g", worst,
              cfg.tol("trivial_beta"))
    worst = 0.0
    for _ in range(3):
        u = Field.from_flat(g, Vf.Q @ rng.standard_normal(len(Vf)))
        worst = max(worst, trivial_beta_residual(u, Vf, M, gv))
    rec.report("trivial_beta_span", "g-conjugation on members of g A^2", worst, reference=cfg.tol("trivial_beta"))
    return rec


def suite_factorization(cfg: SuiteConfig, rng: np.random.Generator) -> Recorder:
    rec = Recorder("factorization")
    ms = cfg.grids
    grids = [cfg.grid(m) for m in ms]
    hs = [g.h[0] for g in grids]
    hfn = smooth_random(rng, cfg.n, 1, _width(cfg))
    Hfn = smooth_random(rng, cfg.n, 1 << cfg.n, _width(cfg))
    cases: dict[str, list[float]] = {}
    for g in grids:
        h0 = Field.scalar(g, hfn(g.points)[:, 0])
        generic = _problem_from(cfg.generic, g)
        f = Field.scalar(g, evaluate(cfg.fg["f"], g))
        gg = Field.scalar(g, evaluate(cfg.fg["g"], g))
        zero = Field.zeros(g)
        specs = {
            "generic": PotentialSpec(generic.alpha, generic.beta),
            "f_only": PotentialSpec(potential_from_fg(f, gg).alpha, zero, f=f),
            "f_and_g": potential_from_fg(f, gg),
            "zero": PotentialSpec(zero, zero),
        }
        for name, spec in specs.items():
            for order in ("forward", "adjoint"):
                cases.setdefault(f"{name}_{order}", []).append(factorization_residual(h0, spec, order))
        for order in ("forward", "adjoint"):
            V = schrodinger_potential_fg(f, gg, order)
            cases.setdefault(f"schrodinger_fg_{order}", []).append(
                factorization_residual(h0, specs["f_and_g"], order, potential=V))
        cases.setdefault("full_expansion", []).append(
            full_factorization_residual(_field(Hfn, g), specs["generic"]))
    for name, rs in cases.items():
        _order_check(rec, cfg, name, "Schrodinger factorization", ms, hs, rs)
    # the two potentials differ by -2 div b + 2 a.conj(b) - 2 a.b
    spec = PotentialSpec(*(lambda p: (p.alpha, p.beta))(_problem_from(cfg.generic, grids[0])))
    gap = spec.potential("adjoint") - spec.potential("forward")
    pred = 2 * spec.div_beta + 2 * spec.alpha_dot_beta - 2 * spec.alpha_dot_beta_bar
    rec.upper("potential_difference", "adjoint minus forward potential", float(np.abs(gap - pred).max()), 1e-12)
    return rec


SUITE_FUNCS = {
    "algebra": suite_algebra,
    "calculus": suite_calculus,
    "vekua": suite_vekua,
    "hodge": suite_hodge,
    "kernels": suite_kernels,
    "factorization": suite_factorization,
}


def run_suites(cfg: SuiteConfig) -> list[Recorder]:
    children = np.random.SeedSequence(cfg.seed).spawn(len(SUITES))
    out = []
    for name, child in zip(SUITES, children):
        if name in cfg.suites:
            out.append(SUITE_FUNCS[name](cfg, np.random.default_rng(child)))
    return out
