import numpy as np
import pytest

from conftest import generic_problem, smooth_field
from vekuakit.clifford import Multivector
from vekuakit.domain import Field
from vekuakit.hodge import VekuaSpaces, monogenic_basis, project_bergman, vekua_basis
from vekuakit.kernels import (
    KernelTable,
    blade_weights,
    kernel_eval,
    kernel_projection,
    kernel_slice,
    kernel_symmetry_residual,
    reproduce_component,
    trivial_beta_residual,
)
from vekuakit.vekua import VekuaProblem, vekua_residual


@pytest.fixture
def generic_basis(grid9):
    return VekuaSpaces(generic_problem(grid9), 2).vekua


def test_blade_weights_are_one():
    for n in range(1, 6):
        assert np.all(blade_weights(n) == 1.0)


def test_degree_zero_kernels(grid9):
    M = monogenic_basis(grid9, 0)
    vol = grid9.volume
    for x, y in [(0, 5), (12, 40), (80, 80)]:
        assert kernel_eval(0, x, y, M).allclose(Multivector.scalar(1 / vol, 2))
        assert kernel_eval(1, x, y, M).allclose(Multivector.blade(2, 1, 1 / vol))


def test_off_grid_point(grid9, generic_basis):
    with pytest.raises(ValueError):
        kernel_eval(0, [0.01, 0.0], 3, generic_basis)


def test_slice_lies_in_span(grid9, generic_basis):
    prob = generic_problem(grid9)
    for y in (0, 40, 77):
        k = kernel_slice(2, y, generic_basis)
        assert (generic_basis.project(k) - k).norm() < 1e-12 * max(k.norm(), 1)
        assert vekua_residual(k, prob) <= generic_basis.build_residual * 10


def test_reproduction(grid9, generic_basis):
    V = generic_basis
    for j in (0, 4, len(V) - 1):
        for x in (10, 40):
            for A in range(4):
                assert reproduce_component(V[j], A, x, V) == pytest.approx(V[j].values[x, A], abs=1e-12)
    assert reproduce_component(Field.zeros(grid9), 1, 3, V) == 0.0
    w = smooth_field(grid9)
    p = V.project(w)
    got = reproduce_component(w, 3, 30, V)
    assert got == pytest.approx(p.values[30, 3], abs=1e-12)
    assert abs(got - w.values[30, 3]) > 1e-6


@pytest.mark.parametrize("trivial", [True, False])
def test_symmetry(grid9, trivial):
    prob = VekuaProblem.trivial(grid9) if trivial else generic_problem(grid9)
    V = VekuaSpaces(prob, 2).vekua
    for A in range(4):
        for B in range(4):
            assert kernel_symmetry_residual(A, B, V, samples=50) <= 1e-10


def test_kernel_projection_matches_galerkin(grid9, generic_basis):
    w = smooth_field(grid9, 3)
    a = kernel_projection(w, generic_basis, materialize=True)
    b = kernel_projection(w, generic_basis, materialize=False)
    ref = generic_basis.project(w)
    assert (a - ref).norm() <= 1e-8 * ref.norm() and (b - ref).norm() <= 1e-8 * ref.norm()
    u = generic_basis[2] * 3.0
    assert (kernel_projection(u, generic_basis) - u).norm() <= 1e-8 * u.norm()


def test_kernel_projection_trivial_is_bergman(grid9):
    M = monogenic_basis(grid9, 2)
    w = smooth_field(grid9, 4)
    assert np.allclose(kernel_projection(w, M).values, project_bergman(w, M).values, atol=1e-12)


def test_memory_cap(generic_basis):
    with pytest.raises(MemoryError):
        KernelTable(generic_basis, cap=1024).materialize()


def test_table_calls_agree(generic_basis):
    kt = KernelTable(generic_basis).materialize()
    assert kt(1, 7, 20).allclose(kernel_eval(1, 7, 20, generic_basis), atol=1e-14)
    assert np.allclose(kt.diagonal(2), [kernel_eval(2, x, x, generic_basis)[2] for x in range(generic_basis.grid.size)])


def test_g_conjugation_on_span_members(grid9):
    g = Field.scalar(grid9, np.exp(0.5 * grid9.points[:, 0] + 0.3 * grid9.points[:, 1] ** 2))
    prob = VekuaProblem.from_fg(None, g)
    Vf = vekua_basis(prob, 2, method="factorized")
    M = monogenic_basis(grid9, 2)
    u = Field.from_flat(grid9, Vf.Q @ np.linspace(1, 2, len(Vf)))
    assert trivial_beta_residual(u, Vf, M, g) <= 1e-10
    with pytest.raises(ValueError):
        trivial_beta_residual(u, Vf, M, Field.scalar(grid9, -1.0))
