"""Command-line runner: ``verify``, ``hodge``, ``kernels``, ``factorize``.

Configs are JSON files whose keys are the fields of :class:`SuiteConfig`.
Exit status: 0 when every check passes, 1 on a failed check, 2 on a bad
config.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .domain import Field, write_field_csv
from .expressions import ExpressionError, field_from_spec
from .factorization import (
    PotentialSpec,
    factorization_residual,
    potential_from_fg,
    schrodinger_potential_fg,
)
from .hodge import VekuaSpaces, hodge_split
from .kernels import export_kernel_slice
from .suites import SUITES, ConfigError, Recorder, SuiteConfig, _problem_from, fit_order, run_suites

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
VOLATILE_KEYS = ("timestamp", "runtime_s", "elapsed_s")


def load_config(path: str | None, seed: int | None = None, suites: str | None = None,
                grid: str | None = None) -> SuiteConfig:
    data: dict = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    if seed is not None:
        data["seed"] = seed
    if suites:
        data["suites"] = [s.strip() for s in suites.split(",") if s.strip()]
    if grid:
        try:
            data["grids"] = [int(m) for m in grid.split(",")]
        except ValueError:
            raise ConfigError(f"--grid expects comma-separated integers, got {grid!r}") from None
    return SuiteConfig.from_dict(data)


def environment_stamp() -> dict:
    return {
        "package": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
    }


def build_report(cfg: SuiteConfig, recorders: list[Recorder], elapsed: float) -> dict:
    checks = [c.to_record() for r in recorders for c in r.checks]
    failed = [f"{c['suite']}.{c['name']}" for c in checks if c["passed"] is False]
    return {
        "status": "pass" if not failed else "fail",
        "failed": failed,
        "counts": {
            "pass": sum(c["passed"] is True for c in checks),
            "fail": len(failed),
            "info": sum(c["passed"] is None for c in checks),
        },
        "checks": checks,
        "convergence": [vars(row) for r in recorders for row in r.rows],
        "config": cfg.to_dict(),
        "environment": environment_stamp(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "elapsed_s": elapsed,
    }


def canonical(report: dict) -> dict:
    """The report without wall-clock fields; two runs with one seed agree on it exactly."""
    out = {k: v for k, v in report.items() if k not in VOLATILE_KEYS}
    checks = []
    for c in report.get("checks", []):
        c = {k: v for k, v in c.items() if k not in VOLATILE_KEYS}
        if c["name"] == "runtime":
            c.pop("value", None)
        checks.append(c)
    out["checks"] = checks
    return out


def write_json(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")
    return path


def write_convergence_csv(rows: list[dict], path: Path) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "m", "h", "residual", "order"])
        for r in rows:
            w.writerow([r["check"], r["m"], repr(r["h"]), repr(r["residual"]),
                        "" if r["order"] is None else repr(r["order"])])
    return path


# -- subcommands --------------------------------------------------------------

def cmd_verify(cfg: SuiteConfig, out: Path) -> int:
    t0 = time.perf_counter()
    recorders = run_suites(cfg)
    report = build_report(cfg, recorders, time.perf_counter() - t0)
    write_json(report, out / "report.json")
    write_convergence_csv(report["convergence"], out / "convergence.csv")
    for r in recorders:
        for c in r.checks:
            print(c.line())
    print(f"status: {report['status']} ({report['counts']['pass']} pass, {report['counts']['fail']} fail, "
          f"{report['counts']['info']} info)")
    return EXIT_OK if report["status"] == "pass" else EXIT_FAIL


def cmd_hodge(cfg: SuiteConfig, out: Path) -> int:
    grid = cfg.grid(cfg.grids[-1])
    prob = _problem_from(cfg.generic, grid)
    spaces = VekuaSpaces(prob, cfg.max_degree)
    w = field_from_spec(cfg.target, grid)
    split = hodge_split(w, spaces, test_count=max(cfg.test_counts))
    write_field_csv(w, out / "field.csv")
    write_field_csv(split.p, out / "p.csv")
    write_field_csv(split.q, out / "q.csv")
    cert = {
        "split": split.to_record(),
        "vekua_basis": spaces.vekua.to_record(),
        "monogenic_basis": spaces.monogenic.to_record(),
        "condition_S": spaces.condition,
        "grid": {"n": grid.n, "m": grid.m, "box": [list(b) for b in grid.box]},
    }
    write_json(cert, out / "hodge.json")
    ok = split.orthogonality <= 1e-10 and split.pythagoras <= 1e-9
    print(f"orthogonality {split.orthogonality:.3e}, pythagoras {split.pythagoras:.3e}, "
          f"membership {split.membership:.3e}, vekua residual of p {split.vekua_residual:.3e}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_kernels(cfg: SuiteConfig, out: Path) -> int:
    grid = cfg.grid(cfg.grids[-1])
    prob = _problem_from(cfg.generic, grid)
    basis = VekuaSpaces(prob, cfg.max_degree).vekua
    A = int(cfg.kernel.get("blade", 0))
    x = cfg.kernel.get("point")
    if x is None:   # the node nearest the box center
        c = np.array([(lo + hi) / 2 for lo, hi in cfg.box])
        x = int(np.argmin(((grid.points - c) ** 2).sum(axis=1)))
    path = export_kernel_slice(A, x, basis, out / f"kernel_A{A}.csv")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_factorize(cfg: SuiteConfig, out: Path) -> int:
    rows, residuals = [], {}
    for m in cfg.grids:
        g = cfg.grid(m)
        generic = _problem_from(cfg.generic, g)
        h0 = field_from_spec(cfg.target, g).scalar_part()
        h0 = Field.scalar(g, h0)
        f = field_from_spec(cfg.fg["f"], g)
        gg = field_from_spec(cfg.fg["g"], g)
        fg = potential_from_fg(f, gg)
        cases = {"generic": PotentialSpec(generic.alpha, generic.beta), "f_and_g": fg}
        for name, spec in cases.items():
            for order in ("forward", "adjoint"):
                r = factorization_residual(h0, spec, order)
                residuals.setdefault(f"{name}_{order}", []).append(r)
        for order in ("forward", "adjoint"):
            r = factorization_residual(h0, fg, order, potential=schrodinger_potential_fg(f, gg, order))
            residuals.setdefault(f"schrodinger_fg_{order}", []).append(r)
    hs = [cfg.grid(m).h[0] for m in cfg.grids]
    ok = True
    for name, rs in residuals.items():
        order = fit_order(hs, rs)
        ok &= abs(order - 2.0) <= 0.3
        for m, h, r in zip(cfg.grids, hs, rs):
            rows.append({"check": name, "m": m, "h": h, "residual": r, "order": order})
        print(f"{name:28s} order {order:5.2f}  residuals " + " ".join(f"{r:.2e}" for r in rs))
    write_convergence_csv(rows, out / "factorization.csv")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"verify": cmd_verify, "hodge": cmd_hodge, "kernels": cmd_kernels, "factorize": cmd_factorize}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vekuakit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default="vekuakit-out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--suites", help=f"comma-separated subset of {','.join(SUITES)}")
        p.add_argument("--grid", help="comma-separated grid sizes, e.g. 9,17,33")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, args.suites, args.grid)
    except (ConfigError, ExpressionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, out)
    except ExpressionError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
