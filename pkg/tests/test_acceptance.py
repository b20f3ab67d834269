"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned here rather than read from the suite defaults, and
every verdict is recomputed from the recorded values.
"""
import json
import time

import pytest

from vekuakit.cli import build_report, canonical
from vekuakit.suites import SuiteConfig, run_suites

EXACT = 1e-12
ALGEBRA_SECONDS = 5.0
CALCULUS_ORDER = 1.5
CALCULUS_FINEST = 5e-2
CALCULUS_SECONDS = 60.0
ORDER, SLACK = 2.0, 0.3
ORTHOGONALITY = 1e-10
PYTHAGORAS = 1e-9
MEMBERSHIP_NOISE = 0.05
PROJECTION = 1e-9
KERNEL_PROJECTION = 1e-8
KERNEL_SYMMETRY = 1e-10
KERNEL_REPRODUCTION = 1e-8
TRIVIAL_BETA = 1e-6
NEGATIVE_RATIO = 10.0
BERGMAN_KILL = 0.1
FULL_SECONDS = 600.0


@pytest.fixture(scope="module")
def run():
    cfg = SuiteConfig()
    t0 = time.perf_counter()
    recorders = run_suites(cfg)
    elapsed = time.perf_counter() - t0
    checks = {f"{c.suite}.{c.name}": c for r in recorders for c in r.checks}
    return cfg, recorders, checks, elapsed


def verdict(capsys, number: int, title: str, items: list[tuple[str, bool, str]]) -> None:
    ok = all(passed for _, passed, _ in items)
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {title}")
        for name, passed, text in items:
            print(f"    [{'ok' if passed else 'xx'}] {name}: {text}")
    assert ok, "; ".join(f"{name}: {text}" for name, passed, text in items if not passed)


def upper(checks, key, tol):
    v = checks[key].value
    return key, v <= tol, f"{v:.3g} <= {tol:g}"


def lower(checks, key, tol):
    v = checks[key].value
    return key, v >= tol, f"{v:.3g} >= {tol:g}"


def order(checks, key):
    v = checks[key].value
    return key, abs(v - ORDER) <= SLACK, f"order {v:.3f} in {ORDER} +- {SLACK}"


def test_criterion_01_algebra(run, capsys):
    _, _, checks, _ = run
    items = [upper(checks, f"algebra.{k}", EXACT) for k in (
        "defining_relation", "conjugation_sign_law", "blade_square_law", "scalar_part_dot",
        "scalar_part_swap", "associativity", "conjugation_antiautomorphism")]
    items.append(upper(checks, "algebra.runtime", ALGEBRA_SECONDS))
    verdict(capsys, 1, "algebra exactness", items)


def test_criterion_02_calculus(run, capsys):
    _, _, checks, _ = run
    c = checks["calculus.dt_identity_order"]
    items = [
        ("calculus.dt_identity_order", c.value >= CALCULUS_ORDER,
         f"min fitted order {c.value:.3f} >= {CALCULUS_ORDER} (per field {[round(o, 3) for o in c.detail['orders']]})"),
        upper(checks, "calculus.dt_identity_finest", CALCULUS_FINEST),
        upper(checks, "calculus.runtime", CALCULUS_SECONDS),
    ]
    verdict(capsys, 2, "D T = I on interior points", items)


def test_criterion_03_vekua_construction(run, capsys):
    _, _, checks, _ = run
    items = [upper(checks, "vekua.contraction_bound", 1.0 - 1e-12)]
    items.append(order(checks, "vekua.exact_solution_order"))
    for seed in ("one", "x1e2+x2e1", "x1-x2e12"):
        items.append(order(checks, f"vekua.seed_{seed}_order"))
    verdict(capsys, 3, "Vekua solutions from monogenic seeds", items)


def test_criterion_04_hodge_orthogonality(run, capsys):
    cfg, _, checks, _ = run
    c = checks["hodge.complement_membership_decreasing"]
    rows = c.detail["rows"]
    mono = all(b <= a * (1 + MEMBERSHIP_NOISE) for row in rows for a, b in zip(row, row[1:]))
    items = [
        upper(checks, "hodge.orthogonality", ORTHOGONALITY),
        upper(checks, "hodge.pythagoras", PYTHAGORAS),
        (c.suite + "." + c.name, mono and cfg.test_counts[0] == 10 and cfg.test_counts[-1] == 40,
         f"membership over test counts {cfg.test_counts}: "
         + "; ".join(" ".join(f"{v:.3f}" for v in row) for row in rows)),
    ]
    verdict(capsys, 4, "Hodge orthogonality and complement membership", items)


def test_criterion_05_adjoint_identity(run, capsys):
    _, _, checks, _ = run
    c = checks["hodge.adjoint_identity_order_min"]
    orders = c.detail["orders"]
    items = [(f"hodge.adjoint_identity_{k}", abs(o - ORDER) <= SLACK, f"order {o:.3f}")
             for k, o in enumerate(orders)]
    assert len(orders) == 10
    verdict(capsys, 5, f"adjoint identity, 10 random pairs, m in {c.detail['grids']}", items)


def test_criterion_06_projection_equivalences(run, capsys):
    _, _, checks, _ = run
    diffs = checks["hodge.star_conj_agreement"].detail["differences"]
    items = [
        upper(checks, "hodge.galerkin_idempotent", PROJECTION),
        upper(checks, "hodge.galerkin_self_adjoint", PROJECTION),
        ("hodge.star_reproduces_members", checks["hodge.star_reproduces_members"].value <= 1.0,
         f"max residual / (10 x build residual) = {checks['hodge.star_reproduces_members'].value:.3g} <= 1"),
        ("hodge.conj_reproduces_members", checks["hodge.conj_reproduces_members"].value <= 1.0,
         f"max residual / (10 x build residual) = {checks['hodge.conj_reproduces_members'].value:.3g} <= 1"),
        ("hodge.star_conj_agreement", all(b < a for a, b in zip(diffs, diffs[1:])),
         "probe differences " + " ".join(f"{d:.3g}" for d in diffs)),
    ]
    verdict(capsys, 6, "projection equivalences", items)


def test_criterion_07_kernels(run, capsys):
    _, _, checks, _ = run
    items = [
        upper(checks, "kernels.kernel_projection", KERNEL_PROJECTION),
        upper(checks, "kernels.kernel_symmetry", KERNEL_SYMMETRY),
        upper(checks, "kernels.kernel_reproduction", KERNEL_REPRODUCTION),
        upper(checks, "kernels.trivial_beta_random", TRIVIAL_BETA),
    ]
    verdict(capsys, 7, "component-wise reproducing kernels", items)


def test_criterion_08_factorizations(run, capsys):
    _, _, checks, _ = run
    cases = ["generic", "f_only", "f_and_g", "schrodinger_fg", "zero"]
    items = [order(checks, f"factorization.{c}_{o}_order") for c in cases for o in ("forward", "adjoint")]
    verdict(capsys, 8, "Schrodinger factorizations", items)


def test_criterion_09_negative_controls(run, capsys):
    cfg, _, checks, _ = run
    items = [
        lower(checks, "vekua.right_multiplication_breaks", NEGATIVE_RATIO),
        upper(checks, "hodge.bergman_kills_d_images", BERGMAN_KILL),
        ("degree", cfg.max_degree >= 2, f"max_degree {cfg.max_degree} >= 2"),
    ]
    verdict(capsys, 9, "negative controls", items)


def test_criterion_10_runtime_and_determinism(run, capsys):
    cfg, recorders, _, elapsed = run
    first = canonical(build_report(cfg, recorders, elapsed))
    t0 = time.perf_counter()
    again = run_suites(SuiteConfig())
    second = canonical(build_report(cfg, again, time.perf_counter() - t0))
    same = json.dumps(first) == json.dumps(second)
    items = [
        ("full default suite", elapsed < FULL_SECONDS, f"{elapsed:.1f} s < {FULL_SECONDS:g} s"),
        ("determinism", same, "reports agree outside wall-clock fields" if same else "reports differ"),
    ]
    verdict(capsys, 10, "runtime and determinism", items)
