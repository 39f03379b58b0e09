"""Backward-in-time solver for the double-obstacle quasi-variational inequality.

Each time step is an explicit monotone continuation step followed by an
obstacle fixed point: the iterate ``W`` is repeatedly clipped between the two
intervention operators evaluated on ``W`` itself, so chains of profitable
impulses at the same instant are resolved.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .grid import CFLError, Grid, check_cfl
from .operators import (
    ValueField,
    apply_local_operator,
    clamp_count,
    interpolate,
    intervention_inf,
    intervention_sup,
)
from .problem import Priority, ProblemSpec, Sampling, ValidationReport, validate_assumptions

log = logging.getLogger(__name__)


class AssumptionError(ValueError):
    def __init__(self, report: ValidationReport):
        failed = [c.name for c in report.checks if not c.passed]
        super().__init__(f"standing assumptions fail: {', '.join(failed)} (set override_assumptions to solve anyway)")
        self.report = report


class FixedPointError(RuntimeError):
    def __init__(self, slice_index: int, residual: float, iterations: int):
        super().__init__(
            f"obstacle fixed point did not converge at slice {slice_index} "
            f"after {iterations} iterations (last change {residual:.3e})"
        )
        self.slice_index = slice_index
        self.residual = residual


@dataclass(frozen=True)
class SolverOptions:
    fp_tol: float = 1e-9
    fp_max_iter: int = 200
    transform_tol: float = 5e-6
    override_assumptions: bool = False
    # zeroth-order term of the scaled equation: "exponential" integrates it
    # exactly over a step, "explicit" uses forward Euler
    reaction: str = "exponential"


@dataclass
class SolveResult:
    stack: NDArray  # (time_steps + 1, *grid.shape)
    grid: Grid
    iterations: NDArray  # per slice, index time_steps is 0
    residuals: NDArray
    clamp_events: int
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)

    def slice(self, n: int) -> ValueField:
        return ValueField(self.stack[n], self.grid.time(n), self.grid)

    def value_at(self, n: int, x) -> float:
        return float(interpolate(self.stack[n], self.grid, np.asarray(x, dtype=float).reshape(1, -1))[0])


def clip_step(v_cont: NDArray, hsup: NDArray, hinf: NDArray, priority: Priority) -> NDArray:
    if priority == Priority.PLAYER_II:
        return np.minimum(hinf, np.maximum(hsup, v_cont))
    return np.maximum(hsup, np.minimum(hinf, v_cont))


def obstacle_fixed_point(
    v_cont: ValueField,
    spec: ProblemSpec,
    opts: SolverOptions = SolverOptions(),
    initial: NDArray | None = None,
    cost_scale: float = 1.0,
    slice_index: int = -1,
) -> tuple[NDArray, int]:
    """Iterate ``W <- clip(v_cont, W)`` to a fixed point; returns ``(W, iterations)``."""
    W = np.array(v_cont.values if initial is None else initial, dtype=float)
    change = math.inf
    for it in range(1, opts.fp_max_iter + 1):
        wf = v_cont.with_values(W)
        hs = intervention_sup(wf, spec, cost_scale).values
        hi = intervention_inf(wf, spec, cost_scale).values
        new = clip_step(v_cont.values, hs, hi, spec.priority)
        change = float(np.max(np.abs(new - W)))
        W = new
        if change < opts.fp_tol:
            return W, it
    raise FixedPointError(slice_index, change, opts.fp_max_iter)


def continuation(next_slice: ValueField, spec: ProblemSpec) -> ValueField:
    """Explicit step ``V + dt (L V + f)`` from slice ``n + 1`` to slice ``n``."""
    grid = next_slice.grid
    LV = apply_local_operator(next_slice, spec, grid).values
    f = spec.running_gain(next_slice.t, grid.points)
    return ValueField(next_slice.values + grid.dt * (LV + f), next_slice.t - grid.dt, grid)


def _preflight(spec: ProblemSpec, grid: Grid, opts: SolverOptions) -> None:
    ok, dt_max = check_cfl(spec, grid)
    if not ok:
        raise CFLError(grid.dt, dt_max)
    report = validate_assumptions(spec, Sampling(bounds=grid.bounds, states_per_dim=41 if grid.dim == 1 else 15))
    if not report.overall:
        if not opts.override_assumptions:
            raise AssumptionError(report)
        log.warning("solving despite failed assumption checks: %s", [c.name for c in report.checks if not c.passed])


def _terminal(spec: ProblemSpec, grid: Grid) -> NDArray:
    return np.asarray(spec.terminal_gain(grid.points), dtype=float)


def solve_backward(spec: ProblemSpec, grid: Grid, opts: SolverOptions = SolverOptions()) -> SolveResult:
    import time

    start = time.perf_counter()
    _preflight(spec, grid, opts)
    N = grid.time_steps
    stack = np.empty((N + 1,) + grid.shape)
    iterations = np.zeros(N + 1, dtype=np.int64)
    stack[N] = _terminal(spec, grid)
    for n in range(N - 1, -1, -1):
        v_cont = continuation(ValueField(stack[n + 1], grid.time(n + 1), grid), spec)
        v_cont = ValueField(v_cont.values, grid.time(n), grid)
        stack[n], iterations[n] = obstacle_fixed_point(v_cont, spec, opts, slice_index=n)
    result = SolveResult(stack, grid, iterations, np.zeros(N + 1), clamp_count(grid, spec) * N)
    result.residuals = qvi_residual(result, spec, grid)
    result.wall_time = time.perf_counter() - start
    return result


def solve_backward_transformed(spec: ProblemSpec, grid: Grid, opts: SolverOptions = SolverOptions()) -> SolveResult:
    """Solve for ``G(t, x) = exp(t) V(t, x)`` and map the stack back.

    The scaled equation has a zeroth-order term ``G`` and costs and running
    gain multiplied by ``exp(t)``; terminal data is ``exp(T) g``.
    """
    import time

    start = time.perf_counter()
    _preflight(spec, grid, opts)
    N, dt = grid.time_steps, grid.dt
    gamma = np.empty((N + 1,) + grid.shape)
    iterations = np.zeros(N + 1, dtype=np.int64)
    gamma[N] = math.exp(grid.time(N)) * _terminal(spec, grid)
    if opts.reaction == "exponential":
        decay = math.exp(-dt)
    elif opts.reaction == "explicit":
        decay = None
    else:
        raise ValueError(f"unknown reaction treatment {opts.reaction!r}")
    for n in range(N - 1, -1, -1):
        t_next = grid.time(n + 1)
        nxt = ValueField(gamma[n + 1], t_next, grid)
        LG = apply_local_operator(nxt, spec, grid).values
        f = math.exp(t_next) * spec.running_gain(t_next, grid.points)
        if decay is None:
            g_cont = gamma[n + 1] + dt * (LG + f - gamma[n + 1])
        else:
            g_cont = decay * (gamma[n + 1] + dt * (LG + f))
        t = grid.time(n)
        gamma[n], iterations[n] = obstacle_fixed_point(
            ValueField(g_cont, t, grid), spec, opts, cost_scale=math.exp(t), slice_index=n
        )
    scale = np.exp(-grid.times).reshape((N + 1,) + (1,) * grid.dim)
    result = SolveResult(gamma * scale, grid, iterations, np.zeros(N + 1), clamp_count(grid, spec) * N)
    result.residuals = qvi_residual(result, spec, grid)
    result.wall_time = time.perf_counter() - start
    result.meta["transformed"] = True
    return result


def slice_residual(
    V: ValueField, v_cont: NDArray, spec: ProblemSpec, dt: float
) -> NDArray:
    """Pointwise discrete residual of the double-obstacle equation at one slice."""
    pde = (V.values - v_cont) / dt
    gap_sup = V.values - intervention_sup(V, spec).values
    gap_inf = V.values - intervention_inf(V, spec).values
    if spec.priority == Priority.PLAYER_II:
        return np.maximum(np.minimum(pde, gap_sup), gap_inf)
    return np.minimum(np.maximum(pde, gap_inf), gap_sup)


def qvi_residual(result: SolveResult, spec: ProblemSpec, grid: Grid | None = None) -> NDArray:
    """Per-slice max absolute residual; interior nodes for ``n < N``, all nodes at ``N``."""
    grid = grid or result.grid
    N = grid.time_steps
    out = np.empty(N + 1)
    out[N] = float(np.max(np.abs(result.stack[N] - _terminal(spec, grid))))
    interior = grid.interior()
    for n in range(N):
        V = ValueField(result.stack[n], grid.time(n), grid)
        v_cont = continuation(ValueField(result.stack[n + 1], grid.time(n + 1), grid), spec).values
        r = slice_residual(V, v_cont, spec, grid.dt)
        out[n] = float(np.max(np.abs(r[interior])))
    return out
