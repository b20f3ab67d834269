import numpy as np
import pytest

from vekuakit.domain import Field, GridDomain
from vekuakit.expressions import field_from_spec
from vekuakit.vekua import VekuaProblem

GENERIC = {
    "alpha": {"e1": "0.5 + 0.4*x2", "e2": "0.3*x1"},
    "beta": {"1": "0.2 + 0.4*x1", "e12": "0.3*x2"},
}
BOX = [(-0.25, 0.25), (-0.25, 0.25)]


def box_grid(m: int, n: int = 2) -> GridDomain:
    return GridDomain(n, m, [(-0.25, 0.25)] * n)


def generic_problem(grid: GridDomain) -> VekuaProblem:
    return VekuaProblem(grid, field_from_spec(GENERIC["alpha"], grid), field_from_spec(GENERIC["beta"], grid))


def exp_problem(grid: GridDomain) -> VekuaProblem:
    return VekuaProblem.from_fg(Field.scalar(grid, np.exp(grid.points[:, 0])))


def smooth_field(grid: GridDomain, seed: int = 0) -> Field:
    rng = np.random.default_rng(seed)
    k = rng.uniform(-1, 1, (grid.blades, 3, grid.n)) * np.pi / 0.5
    ph = rng.uniform(0, 2 * np.pi, (grid.blades, 3))
    a = rng.standard_normal((grid.blades, 3))
    x = grid.points
    return Field(grid, np.stack([(a[b] * np.cos(x @ k[b].T + ph[b])).sum(1) for b in range(grid.blades)], 1))


@pytest.fixture
def grid9():
    return box_grid(9)


@pytest.fixture
def grid17():
    return box_grid(17)
