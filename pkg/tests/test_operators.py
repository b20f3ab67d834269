import math

import numpy as np
import pytest

from conftest import box_grid, generic_problem, smooth_field
from vekuakit.clifford import Multivector
from vekuakit.domain import Field, GridDomain, scalar_product
from vekuakit.operators import (
    SingularityError,
    adjoint,
    assemble,
    cauchy_kernel,
    dirac_apply,
    dirac_operator,
    laplacian,
    operator_norm,
    s_operator,
    teodorescu_apply,
    teodorescu_kernels,
    vekua_operator,
)
from vekuakit.suites import compact_mask, fit_order


def test_dirac_of_x1_is_e1():
    g = GridDomain.cube(2, 6)
    d = dirac_apply(Field.scalar(g, g.points[:, 0]))
    assert np.allclose(d.values, [0, 1, 0, 0], atol=1e-12)


def test_dirac_of_x1_e1_is_minus_one():
    g = GridDomain.cube(3, 5)
    v = np.zeros((g.size, 8))
    v[:, 1] = g.points[:, 0]
    d = dirac_apply(Field(g, v))
    assert np.allclose(d.values[:, 0], -1.0) and np.allclose(d.values[:, 1:], 0.0, atol=1e-12)


def test_degree_one_monogenic():
    g = GridDomain.cube(2, 7)
    v = np.zeros((g.size, 4))
    v[:, 2], v[:, 1] = g.points[:, 0], g.points[:, 1]
    assert np.abs(dirac_apply(Field(g, v)).values).max() < 1e-12


def test_cauchy_kernel_values():
    assert cauchy_kernel([1.0, 0.0, 0.0]).allclose(Multivector.vector([-1 / (4 * math.pi), 0, 0]))
    assert cauchy_kernel([0.0, 2.0]).allclose(Multivector.vector([0, -1 / (4 * math.pi)]))
    x = np.array([0.3, -0.2, 0.7])
    assert cauchy_kernel(-x).allclose(-1.0 * cauchy_kernel(x))
    with pytest.raises(SingularityError):
        cauchy_kernel([0.0, 0.0])


@pytest.mark.parametrize("quadrature", ["product", "trapezoid"])
def test_teodorescu_of_zero(quadrature, grid9):
    assert not np.any(teodorescu_apply(Field.zeros(grid9), quadrature).values)


def test_unknown_quadrature(grid9):
    with pytest.raises(ValueError):
        teodorescu_kernels(grid9, "simpson")


def test_teodorescu_of_one_vanishes_at_center(grid9):
    # the kernel is odd and the box is symmetric about its center
    t = teodorescu_apply(Field.scalar(grid9, 1.0))
    assert np.abs(t.values[grid9.locate([0.0, 0.0])]).max() < 1e-13


def test_dt_identity_decreases():
    res, res_c, hs = [], [], []
    for m in (9, 17, 33):
        g = box_grid(m)
        w = smooth_field(g, 1)
        r = dirac_apply(teodorescu_apply(w)) - w
        res.append(r.norm(g.interior_mask) / w.norm(g.interior_mask))
        cm = compact_mask(g)
        res_c.append(r.norm(cm) / w.norm(cm))
        hs.append(g.h[0])
    assert res[0] > res[1] > res[2]
    assert res[2] <= 5e-2
    assert fit_order(hs, res_c) == pytest.approx(2.0, abs=0.3)


def test_product_rule_beats_trapezoid():
    # reference: product rule on a finer grid, compared at shared nodes
    fine = box_grid(65)
    ref = teodorescu_apply(smooth_field(fine, 2))
    err = {}
    for q in ("product", "trapezoid"):
        for m in (9, 17, 33):
            g = box_grid(m)
            idx = [fine.locate(p) for p in g.points]
            err[q, m] = np.abs(teodorescu_apply(smooth_field(g, 2), q).values - ref.values[idx]).max()
    hs = [0.5 / 8, 0.5 / 16, 0.5 / 32]
    assert fit_order(hs, [err["product", m] for m in (9, 17, 33)]) > 1.8
    assert all(err["product", m] < err["trapezoid", m] / 5 for m in (9, 17, 33))


def test_laplace_is_minus_d_squared():
    res, hs = [], []
    for m in (17, 33, 65):
        g = box_grid(m)
        u = smooth_field(g, 3).values[:, 0]
        dd = dirac_apply(dirac_apply(Field.scalar(g, u))).scalar_part()
        mask = g.inner_mask(2)
        res.append(np.sqrt((g.weights * mask * (dd + laplacian(g, u)) ** 2).sum()))
        hs.append(g.h[0])
    assert fit_order(hs, res) == pytest.approx(2.0, abs=0.3)


def test_assemble_and_adjoint(grid9):
    prob = generic_problem(grid9)
    S = assemble(("S", prob.alpha, prob.beta))
    u, v = smooth_field(grid9, 4), smooth_field(grid9, 5)
    lhs, rhs = scalar_product(S.apply(u), v), scalar_product(u, adjoint(S).apply(v))
    assert abs(lhs - rhs) <= 1e-10 * u.norm() * v.norm()
    composed = assemble(("sum", [(1.0, "I"), (-1.0, ("compose", "T", ("left", prob.beta)))]), grid9)
    beta_only = s_operator(Field.zeros(grid9), prob.beta)
    assert np.allclose(composed.dense(), beta_only.dense(), atol=1e-13)


def test_vekua_operator_reduces_to_dirac(grid9):
    z = Field.zeros(grid9)
    assert np.array_equal(vekua_operator(z, z).dense(), dirac_operator(grid9).dense())


def test_vekua_operator_kills_f():
    res = []
    for m in (9, 17):
        g = box_grid(m)
        f = Field.scalar(g, np.exp(g.points[:, 0] + 0.5 * g.points[:, 1] ** 2))
        from vekuakit.vekua import log_gradient
        a = log_gradient(f)
        r = vekua_operator(a, Field.zeros(g)).apply(f)
        res.append(r.norm(g.interior_mask) / f.norm(g.interior_mask))
    assert res[1] < res[0] / 3


def test_operator_norm_of_identity(grid9):
    assert operator_norm(assemble("I", grid9)) == pytest.approx(1.0)
