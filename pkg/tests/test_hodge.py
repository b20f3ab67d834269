import numpy as np
import pytest

from conftest import box_grid, generic_problem, smooth_field
from vekuakit.clifford import Multivector
from vekuakit.domain import Field, bubble, test_function_basis
from vekuakit.hodge import (
    EmptyBasisError,
    VekuaSpaces,
    adjoint_hodge_split,
    adjoint_identity_residual,
    gram_schmidt,
    hodge_split,
    monogenic_basis,
    monogenic_residual,
    project_bergman,
    project_vekua,
    vekua_basis,
)
from vekuakit.operators import adjoint_vekua_operator, dirac_apply
from vekuakit.suites import fit_order, monogenic_seeds
from vekuakit.vekua import VekuaProblem, vekua_residual


def test_degree_zero_is_constants(grid9):
    M = monogenic_basis(grid9, 0)
    assert len(M) == 4
    assert M.gram_residual() < 1e-12
    assert np.allclose(M.Q.reshape(grid9.size, 4, 4).std(axis=0), 0.0, atol=1e-12)


def test_members_are_monogenic(grid17):
    M = monogenic_basis(grid17, 3)
    assert M.gram_residual() < 1e-10
    for k in range(len(M)):
        assert monogenic_residual(M[k]) <= M.build_residual + 1e-15


def test_degree_one_candidate_in_span(grid9):
    M = monogenic_basis(grid9, 1)
    w = monogenic_seeds(grid9)["x1e2+x2e1"]
    assert (project_bergman(w, M) - w).norm() / w.norm() <= 1e-8


def test_trivial_vekua_basis_is_monogenic(grid9):
    prob = VekuaProblem.trivial(grid9)
    assert np.array_equal(vekua_basis(prob, 2).Q, monogenic_basis(grid9, 2).Q)


def test_projection_fixes_span(grid9):
    M = monogenic_basis(grid9, 2)
    w = Field.from_flat(grid9, M.Q @ np.arange(1.0, len(M) + 1))
    assert (project_bergman(w, M) - w).norm() / w.norm() <= 1e-10


def test_bergman_kills_d_images():
    ratios = []
    for m in (9, 17, 33):
        g = box_grid(m)
        Dphi = dirac_apply(test_function_basis(g, 1, profile="bump")[0])
        ratios.append(monogenic_basis(g, 3).project(Dphi).norm() / Dphi.norm())
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] <= 0.1


def test_low_degree_orthogonality_is_exact(grid17):
    # summation by parts is exact for the centered stencil on quadratics
    Dphi = dirac_apply(test_function_basis(grid17, 1, profile="bump")[0])
    assert monogenic_basis(grid17, 2).project(Dphi).norm() < 1e-12 * Dphi.norm()


def test_trivial_modes_agree(grid9):
    prob = VekuaProblem.trivial(grid9)
    w = smooth_field(grid9)
    ref = project_bergman(w, monogenic_basis(grid9, 3))
    for mode in ("galerkin", "star", "conj"):
        assert np.allclose(project_vekua(w, prob, mode).values, ref.values, atol=1e-12)


def test_galerkin_and_conj_fix_members(grid9):
    spaces = VekuaSpaces(generic_problem(grid9), 2)
    V = spaces.vekua
    for k in range(len(V)):
        u = V[k]
        assert (spaces.project(u) - u).norm() <= 1e-10
        assert (spaces.project(u, "conj") - u).norm() <= 10 * V.residuals[k] + 1e-10


@pytest.mark.parametrize("mode", ["star", "conj"])
def test_oblique_modes_are_projections(grid9, mode):
    P = VekuaSpaces(generic_problem(grid9), 2).projection_matrix(mode)
    assert np.abs(P @ P - P).max() < 1e-9


def test_members_solve_the_equation(grid17):
    prob = generic_problem(grid17)
    V = vekua_basis(prob, 2)
    assert V.gram_residual() < 1e-10
    assert all(vekua_residual(V[k], prob) <= V.build_residual + 1e-15 for k in range(len(V)))


def test_unknown_mode(grid9):
    with pytest.raises(ValueError):
        project_vekua(smooth_field(grid9), generic_problem(grid9), "oblique")


def test_empty_basis_raises(grid9):
    from vekuakit.hodge import _system
    with pytest.raises(EmptyBasisError):
        _system(grid9, [Field.zeros(grid9)], ["zero"], "monogenic", monogenic_residual)


def test_split_of_member_has_no_complement(grid9):
    prob = generic_problem(grid9)
    spaces = VekuaSpaces(prob, 2)
    split = hodge_split(spaces.vekua[3], spaces)
    assert split.q.norm() < 1e-10
    assert split.orthogonality < 1e-10 or split.q.norm() < 1e-12


def test_split_of_complement_element():
    ratios = []
    for m in (9, 17, 33):
        g = box_grid(m)
        prob = generic_problem(g)
        phi = test_function_basis(g, 1, profile="bump")[0]
        w = adjoint_vekua_operator(prob.alpha, prob.beta).apply(phi)
        split = hodge_split(w, VekuaSpaces(prob, 3))
        assert split.orthogonality < 1e-10 and split.pythagoras < 1e-9
        ratios.append(split.p.norm() / w.norm())
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] < 0.1


def test_adjoint_split_trivial_equals_split(grid9):
    prob = VekuaProblem.trivial(grid9)
    w = smooth_field(grid9)
    a, b = hodge_split(w, prob), adjoint_hodge_split(w, prob)
    assert np.allclose(a.p.values, b.p.values, atol=1e-13)


def test_adjoint_identity_orders():
    hs, trivial, generic = [], [], []
    for m in (9, 17, 33):
        g = box_grid(m)
        w = smooth_field(g, 11)
        phi = Field(g, smooth_field(g, 12).values * bubble(g)[:, None])
        trivial.append(adjoint_identity_residual(w, phi, VekuaProblem.trivial(g)))
        generic.append(adjoint_identity_residual(w, phi, generic_problem(g)))
        hs.append(g.h[0])
        assert adjoint_identity_residual(w, phi * 10.0, generic_problem(g)) == pytest.approx(generic[-1], rel=1e-12)
    assert fit_order(hs, trivial) >= 1.7
    # the coefficient terms pair off pointwise; only summation by parts for D remains
    assert np.allclose(generic, trivial, rtol=1e-8)


def test_adjoint_identity_needs_zero_trace(grid9):
    w = smooth_field(grid9)
    with pytest.raises(ValueError):
        adjoint_identity_residual(w, w, generic_problem(grid9))


def test_vekua_projection_is_not_a_right_module_map(grid9):
    spaces = VekuaSpaces(generic_problem(grid9), 2)
    w = smooth_field(grid9)
    e1 = Multivector.blade(2, 1)
    assert (spaces.project(w * e1) - spaces.project(w) * e1).norm() > 1e-6 * w.norm()
    M = spaces.monogenic
    assert (M.project(w * e1) - M.project(w) * e1).norm() < 1e-12 * w.norm()
