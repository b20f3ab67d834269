import numpy as np
import pytest

from conftest import box_grid, exp_problem, generic_problem, smooth_field
from vekuakit.domain import Field, GridDomain
from vekuakit.suites import compact_mask, fit_order, monogenic_seeds
from vekuakit.vekua import (
    ContractionError,
    NeumannDivergence,
    VekuaProblem,
    beltrami_residual,
    beltrami_transform,
    conductivity_residual,
    log_gradient,
    make_vekua_solution,
    s_apply,
    s_inverse_apply,
    schrodinger_residual,
    vekua_residual,
)

HS = [0.5 / 8, 0.5 / 16, 0.5 / 32]


def test_trivial_s_is_identity(grid9):
    w = smooth_field(grid9)
    prob = VekuaProblem.trivial(grid9)
    assert np.array_equal(s_apply(w, prob).values, w.values)
    out = s_inverse_apply(w, prob, full_output=True)
    assert out.iterations == 1 and np.array_equal(out.field.values, w.values)


def test_trivial_solution_of_one(grid9):
    w = make_vekua_solution(Field.scalar(grid9, 1.0), VekuaProblem.trivial(grid9))
    assert np.allclose(w.values[:, 0], 1.0) and not np.any(w.values[:, 1:])


def test_exp_alpha_is_e1():
    g = box_grid(9)
    prob = exp_problem(g)
    assert np.allclose(prob.alpha.values[:, 1], 1.0) and np.allclose(prob.alpha.values[:, [0, 2, 3]], 0.0)
    assert prob.q < 1


def test_exact_solution_is_second_order():
    rs = [vekua_residual(exp_problem(box_grid(m)).f, exp_problem(box_grid(m))) for m in (9, 17, 33)]
    assert fit_order(HS, rs) == pytest.approx(2.0, abs=0.3)


def test_s_of_exact_solution_is_monogenic_inside():
    rs = []
    for m in (9, 17, 33):
        g = box_grid(m)
        prob = exp_problem(g)
        from vekuakit.operators import dirac_apply
        v = s_apply(prob.f, prob)
        cm = compact_mask(g)
        rs.append(dirac_apply(v).norm(cm) / v.norm(cm))
    assert rs[0] > rs[1] > rs[2]


@pytest.mark.parametrize("make", [exp_problem, generic_problem])
def test_constructed_solutions_on_compact_set(make):
    for name in ("one", "x1e2+x2e1"):
        rs = []
        for m in (9, 17, 33):
            g = box_grid(m)
            prob = make(g)
            w = make_vekua_solution(monogenic_seeds(g)[name], prob)
            rs.append(vekua_residual(w, prob, compact_mask(g)))
        assert fit_order(HS, rs) == pytest.approx(2.0, abs=0.3)


def test_round_trip_and_contraction(grid17):
    prob = generic_problem(grid17)
    assert prob.q < 1
    v = smooth_field(grid17, 7)
    out = s_inverse_apply(v, prob, tol=1e-12, full_output=True)
    assert (s_apply(out.field, prob) - v).norm() / v.norm() < 1e-10
    assert out.measured_contraction <= prob.q
    assert prob.measured_q() <= prob.q


def test_noncontractive_raises():
    g = GridDomain(2, 9, [(-2, 2), (-2, 2)])
    prob = VekuaProblem.from_fg(Field.scalar(g, np.exp(g.points[:, 0])))
    with pytest.raises(ContractionError):
        s_inverse_apply(Field.scalar(g, 1.0), prob)


def test_divergence_reported():
    g = GridDomain(2, 9, [(-2, 2), (-2, 2)])
    prob = VekuaProblem.from_fg(Field.scalar(g, np.exp(3 * g.points[:, 0])))
    with pytest.warns(RuntimeWarning), pytest.raises(NeumannDivergence) as exc:
        s_inverse_apply(Field.scalar(g, 1.0), prob, max_iter=30, allow_noncontractive=True)
    assert exc.value.iterations == 30


def test_nonpositive_f_rejected(grid9):
    with pytest.raises(ValueError, match="positive"):
        log_gradient(Field.scalar(grid9, grid9.points[:, 0]))


def test_beltrami_with_unit_f_g_is_monogenicity(grid9):
    one = Field.scalar(grid9, 1.0)
    w = monogenic_seeds(grid9)["x1e2+x2e1"]
    u = beltrami_transform(w, one, one)
    assert np.array_equal(u.values, w.values)
    assert beltrami_residual(u, one) < 1e-12


def test_conductivity_of_exact_solution_is_zero(grid9):
    prob = exp_problem(grid9)
    one = Field.scalar(grid9, 1.0)
    assert conductivity_residual(prob.f, prob.f, one) < 1e-12


def test_trivial_potentials_reduce_to_laplace(grid17):
    one = Field.scalar(grid17, 1.0)
    w = monogenic_seeds(grid17)["x1-x2e12"] + monogenic_seeds(grid17)["x1e2+x2e1"]
    assert conductivity_residual(w, one, one) < 1e-12
    assert schrodinger_residual(w, one, one) < 1e-12


def test_equivalent_forms_of_generic_solutions():
    bel, con, sch = [], [], []
    for m in (9, 17, 33):
        g = box_grid(m)
        x = g.points
        f = Field.scalar(g, np.exp(0.6 * x[:, 0] ** 2 + 0.4 * x[:, 1]))
        gg = Field.scalar(g, 1 + 0.3 * x[:, 0] * x[:, 1] + 0.2 * x[:, 1])
        prob = VekuaProblem.from_fg(f, gg)
        w = make_vekua_solution(monogenic_seeds(g)["x1e2+x2e1"] + 1.0, prob)
        cm = compact_mask(g)
        bel.append(beltrami_residual(beltrami_transform(w, f, gg), f, cm))
        con.append(conductivity_residual(w, f, gg, cm))
        sch.append(schrodinger_residual(w, f, gg, cm))
    for rs in (bel, con, sch):
        assert fit_order(HS, rs) == pytest.approx(2.0, abs=0.3)


def test_right_multiplication_leaves_solution_set(grid17):
    from vekuakit.clifford import Multivector
    prob = exp_problem(grid17)
    assert vekua_residual(prob.f * Multivector.blade(2, 1), prob) > 10 * vekua_residual(prob.f, prob)
