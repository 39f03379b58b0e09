"""Command line: ``qvigame validate | solve | simulate | check-dpp``.

Exit codes: 0 success, 1 domain failure (failed checks, CFL, acceptance),
2 usage, I/O or parse errors.  Every output path is given explicitly.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as qio
from .config import Config, ConfigError, load_config
from .grid import CFLError, build_grid
from .policy import extract_policy, region_masks
from .problem import validate_assumptions
from .simulator import check_dpp, check_impulse_tail, default_workers, simulate
from .solver import AssumptionError, FixedPointError, SolveResult, solve_backward

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load(path: str) -> Config:
    try:
        return load_config(path)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except ConfigError as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    report = validate_assumptions(cfg.spec, cfg.sampling)
    sys.stdout.write(qio.dumps(report.to_dict()))
    return OK if report.overall else FAIL


def cmd_solve(args) -> int:
    cfg = _load(args.config)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise UsageError(f"{out} is not empty (use --force to overwrite)")
    try:
        grid = build_grid(cfg.spec, cfg.grid)
        start = time.perf_counter()
        result = solve_backward(cfg.spec, grid, cfg.solver)
        wall = time.perf_counter() - start
    except CFLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL
    except (AssumptionError, FixedPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL
    policy = extract_policy(result, cfg.spec, grid, cfg.act_tol)
    _, counts = region_masks(policy)
    summary = {
        "grid": {
            "bounds": [list(b) for b in grid.bounds],
            "nodes": list(grid.nodes_per_dim),
            "time_steps": grid.time_steps,
            "dt": grid.dt,
            "boundary": grid.boundary.value,
        },
        "iterations": result.iterations.tolist(),
        "residuals": result.residuals.tolist(),
        "max_residual": float(np.max(result.residuals)),
        "clamp_events": int(result.clamp_events),
        "regime_counts": {"continue": counts[:, 0].tolist(), "impulse_I": counts[:, 1].tolist(), "impulse_II": counts[:, 2].tolist()},
    }
    files = {
        "value.csv": qio.value_csv(result.stack, grid),
        "policy.csv": qio.policy_csv(policy, grid),
        "summary.json": qio.dumps(summary),
    }
    hashes = qio.write_files(out, files)
    manifest = qio.manifest(cfg.digest, hashes, {"command": "solve", "wall_time": wall})
    (out / "manifest.json").write_text(qio.dumps(manifest))
    print(f"wrote {', '.join(sorted(files))} and manifest.json to {out}")
    return OK


def _load_solution(cfg: Config, solve_dir: Path):
    try:
        manifest = json.loads((solve_dir / "manifest.json").read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read manifest in {solve_dir}: {exc}") from None
    if manifest.get("config_digest") != cfg.digest:
        raise UsageError("config digest does not match the solve directory's manifest")
    grid = build_grid(cfg.spec, cfg.grid)
    try:
        stack = qio.read_value_csv(solve_dir / "value.csv", grid)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    N = grid.time_steps
    result = SolveResult(stack, grid, np.zeros(N + 1, dtype=np.int64), np.zeros(N + 1), 0)
    policy = extract_policy(result, cfg.spec, grid, cfg.act_tol)
    return grid, result, policy


def _sim_config(cfg: Config, args):
    sim = cfg.simulation
    changes = {"workers": default_workers()}
    if args.paths is not None:
        changes["paths"] = args.paths
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.substeps is not None:
        changes["substeps"] = args.substeps
    if args.t0 is not None:
        changes["t0"] = args.t0
    if args.x0 is not None:
        changes["x0"] = tuple(args.x0)
    try:
        return replace(sim, **changes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    grid, result, policy = _load_solution(cfg, Path(args.solve_dir))
    sim = _sim_config(cfg, args)
    try:
        report = simulate(cfg.spec, grid, result, policy, sim)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    gap = abs(report.J_mean - report.value)
    bound = 3 * report.J_stderr + cfg.allowance
    payload = {"config_digest": cfg.digest, "sim": _sim_dict(sim), "report": report.to_dict(), "gap": gap, "bound": bound}
    passed = gap <= bound
    if report.paths >= 10_000:
        tail = check_impulse_tail(report)
        payload["impulse_tail"] = {"C": tail.C, "nonincreasing": tail.nonincreasing}
    if args.dpp_at is not None:
        try:
            dpp = check_dpp(cfg.spec, grid, result, policy, sim, args.dpp_at)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        dpp_bound = 3 * dpp.stderr + cfg.allowance
        payload["dpp"] = {"s": dpp.s, "residual": dpp.residual, "stderr": dpp.stderr, "bound": dpp_bound}
        passed = passed and abs(dpp.residual) <= dpp_bound
    payload["passed"] = passed
    _emit(args.out, payload)
    return OK if passed else FAIL


def cmd_check_dpp(args) -> int:
    cfg = _load(args.config)
    grid, result, policy = _load_solution(cfg, Path(args.solve_dir))
    sim = _sim_config(cfg, args)
    try:
        dpp = check_dpp(cfg.spec, grid, result, policy, sim, args.s)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    bound = 3 * dpp.stderr + cfg.allowance
    passed = abs(dpp.residual) <= bound
    payload = {
        "config_digest": cfg.digest,
        "sim": _sim_dict(sim),
        "s": dpp.s,
        "residual": dpp.residual,
        "stderr": dpp.stderr,
        "estimate": dpp.estimate,
        "value": dpp.value,
        "bound": bound,
        "passed": passed,
    }
    _emit(args.out, payload)
    return OK if passed else FAIL


def _sim_dict(sim) -> dict:
    # worker count does not change the numbers, so it stays out of the payload
    return {"paths": sim.paths, "seed": sim.seed, "substeps": sim.substeps, "t0": sim.t0, "x0": list(sim.x0)}


def _emit(out: str, payload: dict) -> None:
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(qio.dumps(payload))
    print(f"wrote {path}")


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("config")
    p.add_argument("solve_dir")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--substeps", type=int)
    p.add_argument("--t0", type=float)
    p.add_argument("--x0", type=float, nargs="+")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qvigame", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the standing assumptions; JSON report on stdout")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve the QVI and write value/policy CSV, summary and manifest")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo check of a solve directory")
    _sim_flags(p)
    p.add_argument("--dpp-at", type=float, help="also check the DPP at this slice time")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-dpp", help="Monte Carlo DPP residual at slice time --s")
    _sim_flags(p)
    p.add_argument("--s", type=float, required=True)
    p.set_defaults(func=cmd_check_dpp)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
