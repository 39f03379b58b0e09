"""Monte Carlo evaluation of the gain functional under extracted feedback policies.

Paths are simulated with Euler-Maruyama between slice times; impulses happen
only at slice times, at most one per slice, chosen by a nearest-node policy
lookup.  Normals come from a counter-based generator keyed by
``(seed, step)`` and indexed by path, so any chunking of the paths across
workers reproduces the same numbers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import NDArray

from .grid import Grid
from .operators import interpolate
from .policy import PolicyMap, Regime
from .problem import ProblemSpec
from .solver import SolveResult

_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * math.pi


def normals(seed: int, step: int, start: int, count: int, dim: int) -> NDArray:
    """Standard normals for paths ``start .. start + count - 1`` at ``step``.

    Each path consumes ``ceil(dim / 2)`` 64-bit Philox words; a word is split
    into two 32-bit uniforms feeding one Box-Muller pair.  The stream is keyed
    by ``(seed, step)`` and addressed by path index, so any split of the paths
    into chunks reproduces the same numbers.
    """
    words = (dim + 1) // 2
    offset = start * words
    bg = np.random.Philox(key=[seed & _MASK64, step & _MASK64])
    if offset >= 4:
        bg.advance(offset // 4)
    skip = offset % 4
    raw = bg.random_raw(skip + count * words)[skip:].reshape(count, words)
    z = np.empty((count, dim))
    for w in range(words):
        u1 = ((raw[:, w] >> np.uint64(32)).astype(np.float64) + 0.5) * 2.0**-32
        u2 = ((raw[:, w] & np.uint64(0xFFFFFFFF)).astype(np.float64) + 0.5) * 2.0**-32
        r = np.sqrt(-2.0 * np.log(u1))
        angle = _TWO_PI * u2
        z[:, 2 * w] = r * np.cos(angle)
        if 2 * w + 1 < dim:
            z[:, 2 * w + 1] = r * np.sin(angle)
    return z


@dataclass(frozen=True)
class SimConfig:
    paths: int = 100_000
    seed: int = 0
    substeps: int = 1
    t0: float = 0.0
    x0: tuple[float, ...] = (0.0,)
    workers: int = 1
    chunk: int = 1 << 16

    def __post_init__(self):
        if self.paths < 1 or self.substeps < 1:
            raise ValueError("paths and substeps must be >= 1")
        object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))


@dataclass(frozen=True)
class SimReport:
    J_mean: float
    J_stderr: float
    paths: int
    breakdown: dict  # mean of each payoff term
    hist_I: tuple[int, ...]  # hist_I[n] = number of paths with n player-I impulses
    hist_II: tuple[int, ...]
    tail: tuple[float, ...]  # tail[n - 1] = P[N_I >= n] + P[N_II >= n]
    escapes: int
    value: float  # solver value at (t0, x0)

    def to_dict(self) -> dict:
        return asdict(self)


class SimulationError(RuntimeError):
    pass


def _start_index(grid: Grid, t0: float) -> int:
    n = int(round(t0 / grid.dt))
    if n < 0 or n > grid.time_steps or abs(grid.time(n) - t0) > 1e-9 * max(1.0, grid.horizon):
        raise ValueError(f"time {t0} is not a slice time of the grid")
    return n


def _run_chunk(spec, grid, result, policy, cfg, n0, n_stop, start, count):
    dim = grid.dim
    X = np.tile(np.asarray(cfg.x0, dtype=float), (count, 1))
    running = np.zeros(count)
    paid_I = np.zeros(count)
    paid_II = np.zeros(count)
    n_I = np.zeros(count, dtype=np.int64)
    n_II = np.zeros(count, dtype=np.int64)
    escapes = 0
    dt = grid.dt
    h = dt / cfg.substeps
    sqh = math.sqrt(h)
    for n in range(n0, n_stop):
        t = grid.time(n)
        node = grid.nearest_index(X)
        regime = policy.regimes[n, node]
        act = policy.action_vectors(n)[node]
        mI = regime == Regime.IMPULSE_I
        mII = regime == Regime.IMPULSE_II
        if mI.any():
            paid_I[mI] -= spec.cost_I(t, act[mI])
            n_I[mI] += 1
        if mII.any():
            paid_II[mII] += spec.cost_II(t, act[mII])
            n_II[mII] += 1
        X = X + act
        for k in range(cfg.substeps):
            s = t + k * h
            running += spec.running_gain(s, X) * h
            z = normals(cfg.seed, n * cfg.substeps + k, start, count, dim)
            sig = spec.diffusion(s, X)
            X = X + spec.drift(s, X) * h + sqh * np.einsum("pij,pj->pi", sig, z)
            out = ~grid.contains(X)
            if out.any():
                escapes += int(np.count_nonzero(out))
                X = grid.clamp(X)
    if n_stop == grid.time_steps:
        terminal = spec.terminal_gain(X)
    else:
        terminal = interpolate(result.stack[n_stop], grid, X)
    if not (np.all(np.isfinite(running)) and np.all(np.isfinite(terminal)) and np.all(np.isfinite(X))):
        raise SimulationError("non-finite values in simulated paths")
    return running, paid_I, paid_II, terminal, n_I, n_II, escapes


def _simulate_until(spec, grid, result, policy, cfg, n_stop):
    grid = grid or result.grid
    n0 = _start_index(grid, cfg.t0)
    if n_stop < n0:
        raise ValueError("stopping slice precedes the start slice")
    x0 = np.asarray(cfg.x0, dtype=float).reshape(1, -1)
    if x0.shape[1] != grid.dim or not grid.contains(x0)[0]:
        raise ValueError(f"x0={cfg.x0} is not inside the grid")
    starts = list(range(0, cfg.paths, cfg.chunk))
    jobs = [(s, min(cfg.chunk, cfg.paths - s)) for s in starts]
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(lambda j: _run_chunk(spec, grid, result, policy, cfg, n0, n_stop, *j), jobs))
    else:
        parts = [_run_chunk(spec, grid, result, policy, cfg, n0, n_stop, *j) for j in jobs]
    # concatenation in path order keeps the reduction independent of scheduling
    cols = [np.concatenate([p[i] for p in parts]) for i in range(6)]
    escapes = sum(p[6] for p in parts)
    return n0, cols, escapes


def _mean(col: NDArray) -> float:
    # a constant column is reported exactly rather than with summation noise
    return float(col[0]) if np.all(col == col[0]) else float(np.mean(col))


def _report(cols, escapes, paths, value) -> SimReport:
    running, paid_I, paid_II, terminal, n_I, n_II = cols
    breakdown = {
        "running": _mean(running),
        "costs_I": _mean(paid_I),
        "costs_II": _mean(paid_II),
        "terminal": _mean(terminal),
    }
    total = running + paid_I + paid_II + terminal
    J_mean = breakdown["running"] + breakdown["costs_I"] + breakdown["costs_II"] + breakdown["terminal"]
    constant = np.all(total == total[0])
    stderr = float(np.std(total, ddof=1) / math.sqrt(paths)) if paths > 1 and not constant else 0.0
    hist_I = np.bincount(n_I)
    hist_II = np.bincount(n_II)
    top = max(len(hist_I), len(hist_II)) - 1
    tail = tuple(
        float(np.count_nonzero(n_I >= n) / paths + np.count_nonzero(n_II >= n) / paths) for n in range(1, top + 1)
    )
    return SimReport(
        J_mean=float(J_mean),
        J_stderr=stderr,
        paths=paths,
        breakdown=breakdown,
        hist_I=tuple(int(v) for v in hist_I),
        hist_II=tuple(int(v) for v in hist_II),
        tail=tail,
        escapes=int(escapes),
        value=float(value),
    )


def simulate(spec: ProblemSpec, grid: Grid | None, result: SolveResult, policy: PolicyMap, cfg: SimConfig) -> SimReport:
    """Estimate the gain functional from ``(cfg.t0, cfg.x0)`` under ``policy``."""
    grid = grid or result.grid
    n0, cols, escapes = _simulate_until(spec, grid, result, policy, cfg, grid.time_steps)
    return _report(cols, escapes, cfg.paths, result.value_at(n0, cfg.x0))


@dataclass(frozen=True)
class TailCheck:
    C: float
    nonincreasing: bool
    margins: tuple[float, ...]  # C / n - tail(n)


def check_impulse_tail(report: SimReport, min_paths: int = 10_000) -> TailCheck:
    """Smallest ``C`` with ``tail(n) <= C / n`` for every observed ``n``."""
    if report.paths < min_paths:
        raise ValueError(f"need at least {min_paths} paths, report has {report.paths}")
    tail = np.asarray(report.tail, dtype=float)
    if tail.size == 0:
        return TailCheck(0.0, True, ())
    n = np.arange(1, tail.size + 1)
    C = float(np.max(n * tail))
    return TailCheck(C, bool(np.all(np.diff(tail) <= 0)), tuple(float(v) for v in C / n - tail))


@dataclass(frozen=True)
class DppCheck:
    residual: float
    stderr: float
    estimate: float
    value: float
    s: float


def check_dpp(
    spec: ProblemSpec,
    grid: Grid | None,
    result: SolveResult,
    policy: PolicyMap,
    cfg: SimConfig,
    s: float,
) -> DppCheck:
    """Monte Carlo residual of the dynamic programming identity between t0 and s.

    Payoff terms are accumulated up to slice time ``s`` and completed with the
    solver's value there; at ``s = T`` the terminal payoff itself is used.
    """
    grid = grid or result.grid
    n_s = _start_index(grid, s)
    if n_s <= _start_index(grid, cfg.t0):
        raise ValueError("s must be a slice time after t0")
    n0, cols, escapes = _simulate_until(spec, grid, result, policy, cfg, n_s)
    rep = _report(cols, escapes, cfg.paths, result.value_at(n0, cfg.x0))
    return DppCheck(rep.J_mean - rep.value, rep.J_stderr, rep.J_mean, rep.value, grid.time(n_s))


def default_workers() -> int:
    return max(1, int(os.environ.get("QVIGAME_WORKERS", "1")))
