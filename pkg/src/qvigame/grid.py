"""Truncated space-time lattice and the explicit scheme's time-step ceiling."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from .problem import ProblemSpec

log = logging.getLogger(__name__)


class Boundary(str, enum.Enum):
    NEUMANN_ZERO_SECOND = "NeumannZeroSecond"
    DIRICHLET_FROZEN = "DirichletFrozen"


class CFLError(ValueError):
    """Raised when the time step exceeds the monotonicity ceiling."""

    def __init__(self, dt: float, dt_max: float):
        super().__init__(f"dt={dt:.6g} violates the CFL bound dt_max={dt_max:.6g}")
        self.dt = dt
        self.dt_max = dt_max


@dataclass(frozen=True)
class Grid:
    bounds: tuple[tuple[float, float], ...]
    nodes_per_dim: tuple[int, ...]
    time_steps: int
    horizon: float
    boundary: Boundary = Boundary.NEUMANN_ZERO_SECOND
    # construction diagnostics
    max_action: float = field(default=0.0, compare=False)
    offgrid_pairs: int = field(default=0, compare=False)

    def __post_init__(self):
        if len(self.bounds) != len(self.nodes_per_dim):
            raise ValueError("bounds and nodes_per_dim must have the same length")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError(f"degenerate interval [{lo}, {hi}]")
        if any(n < 3 for n in self.nodes_per_dim):
            raise ValueError("need at least 3 nodes per dimension")
        if self.time_steps < 1 or not self.horizon > 0:
            raise ValueError("time_steps must be >= 1 and horizon > 0")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.nodes_per_dim

    @property
    def size(self) -> int:
        return int(np.prod(self.nodes_per_dim))

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.nodes_per_dim))

    @property
    def dt(self) -> float:
        return self.horizon / self.time_steps

    def coordinate(self, axis: int, j) -> NDArray:
        # by index, never by accumulation
        lo = self.bounds[axis][0]
        return lo + np.asarray(j) * self.dx[axis]

    @cached_property
    def axes(self) -> tuple[NDArray, ...]:
        return tuple(self.coordinate(i, np.arange(n)) for i, n in enumerate(self.nodes_per_dim))

    @cached_property
    def points(self) -> NDArray:
        """Node coordinates, shape ``(*shape, dim)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def time(self, n: int) -> float:
        return self.horizon * n / self.time_steps

    @cached_property
    def times(self) -> NDArray:
        return self.horizon * np.arange(self.time_steps + 1) / self.time_steps

    def interior(self) -> NDArray:
        """Boolean mask of nodes not on the boundary of the box."""
        mask = np.ones(self.shape, dtype=bool)
        for axis in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[axis] = 0
            mask[tuple(sl)] = False
            sl[axis] = -1
            mask[tuple(sl)] = False
        return mask

    def contains(self, x: NDArray) -> NDArray:
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for i, (lo, hi) in enumerate(self.bounds):
            ok &= (x[..., i] >= lo) & (x[..., i] <= hi)
        return ok

    def clamp(self, x: NDArray) -> NDArray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.clip(x, lo, hi)

    def nearest_index(self, x: NDArray) -> NDArray:
        """Flat index of the nearest node to each point (points clamped first)."""
        x = np.asarray(x, dtype=float)
        idx = []
        for i, ((lo, _), n) in enumerate(zip(self.bounds, self.nodes_per_dim)):
            j = np.rint((x[..., i] - lo) / self.dx[i]).astype(np.int64)
            idx.append(np.clip(j, 0, n - 1))
        return np.ravel_multi_index(tuple(idx), self.shape)

    def offgrid_action_pairs(self, actions: NDArray) -> int:
        """Number of (node, action) pairs whose target leaves the domain."""
        if len(actions) == 0:
            return 0
        pts = self.points.reshape(-1, self.dim)
        targets = pts[:, None, :] + np.asarray(actions)[None]
        return int(np.count_nonzero(~self.contains(targets)))


def check_cfl(spec: ProblemSpec, grid: Grid) -> tuple[bool, float]:
    """Return ``(dt <= dt_max, dt_max)`` for the explicit upwind scheme.

    ``dt_max = 1 / sum_i (max a_ii / dx_i^2 + max |b_i| / dx_i)`` with
    ``a = sigma sigma^T``; maxima run over grid nodes and sampled times.
    """
    pts = grid.points.reshape(-1, grid.dim)
    times = np.linspace(0.0, spec.horizon, 5)
    a_max = np.zeros(grid.dim)
    b_max = np.zeros(grid.dim)
    for t in times:
        sig = spec.diffusion(t, pts)
        a = np.einsum("nik,njk->nij", sig, sig)
        a_max = np.maximum(a_max, np.max(np.diagonal(a, axis1=1, axis2=2), axis=0))
        b_max = np.maximum(b_max, np.max(np.abs(spec.drift(t, pts)), axis=0))
    dx = np.array(grid.dx)
    rate = float(np.sum(a_max / dx**2 + b_max / dx))
    dt_max = math.inf if rate == 0 else 1.0 / rate
    return grid.dt <= dt_max, dt_max


@dataclass(frozen=True)
class GridRequest:
    bounds: tuple[tuple[float, float], ...]
    nodes: tuple[int, ...]
    time_steps: int | None = None  # None: smallest count meeting the CFL bound
    boundary: Boundary = Boundary.NEUMANN_ZERO_SECOND


def build_grid(spec: ProblemSpec, request: GridRequest) -> Grid:
    """Build a grid for ``spec``; raises :class:`CFLError` if dt is too large."""
    bounds = tuple((float(lo), float(hi)) for lo, hi in request.bounds)
    nodes = tuple(int(n) for n in request.nodes)
    if len(bounds) != spec.dim:
        raise ValueError(f"grid has {len(bounds)} dimensions, problem has {spec.dim}")
    steps = request.time_steps
    if steps is None:
        probe = Grid(bounds, nodes, 1, spec.horizon, request.boundary)
        _, dt_max = check_cfl(spec, probe)
        steps = 1 if math.isinf(dt_max) else max(1, math.ceil(spec.horizon / dt_max))
        while spec.horizon / steps > dt_max:
            steps += 1
    grid = Grid(bounds, nodes, int(steps), spec.horizon, request.boundary)
    ok, dt_max = check_cfl(spec, grid)
    if not ok:
        raise CFLError(grid.dt, dt_max)
    if spec.dim > 1:
        pts = grid.points.reshape(-1, grid.dim)
        sig = spec.diffusion(0.0, pts)
        a = np.einsum("nik,njk->nij", sig, sig)
        off = a - np.einsum("nii->ni", a)[..., None] * np.eye(grid.dim)
        if np.max(np.abs(off)) > 0:
            raise ValueError("only diagonal sigma sigma^T is supported in dim > 1")

    max_action = 0.0
    for acts in (spec.actions_I, spec.actions_II):
        if len(acts):
            max_action = max(max_action, float(np.max(np.linalg.norm(acts, axis=1))))
    margin = min((hi - lo) / 2 for lo, hi in bounds)
    offgrid = grid.offgrid_action_pairs(spec.actions_I) + grid.offgrid_action_pairs(spec.actions_II)
    if offgrid:
        log.info(
            "%d (node, action) targets leave the domain and will be clamped "
            "(max action %.4g, half-width %.4g)",
            offgrid,
            max_action,
            margin,
        )
    return replace(grid, max_action=max_action, offgrid_pairs=offgrid)
