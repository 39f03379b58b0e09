"""Intervention operators and the discrete local generator on a value slice."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from .grid import Boundary, Grid
from .problem import ProblemSpec

# fractional offsets within this distance of an integer are treated as node-aligned
_SNAP = 1e-9


@dataclass(frozen=True)
class ValueField:
    """One time slice of the value function on ``grid``."""

    values: NDArray
    t: float
    grid: Grid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"slice shape {values.shape} does not match grid shape {self.grid.shape}")
        object.__setattr__(self, "values", values)

    def with_values(self, values: NDArray) -> "ValueField":
        return ValueField(values, self.t, self.grid)


@dataclass(frozen=True)
class Stencil:
    """Multilinear interpolation weights for ``node + action`` at every node."""

    indices: NDArray  # (corners, size) flat node indices
    weights: NDArray  # (corners, size)
    clamped: int  # nodes whose target left the domain

    def apply(self, flat_values: NDArray) -> NDArray:
        return np.einsum("cn,cn->n", self.weights, flat_values[self.indices])


def _axis_stencil(n: int, offset: float):
    target = np.arange(n) + offset
    out = (target < 0) | (target > n - 1)
    target = np.clip(target, 0, n - 1)
    lo = np.minimum(np.floor(target).astype(np.int64), n - 2)
    w = target - lo
    w = np.where(np.abs(w) < _SNAP, 0.0, w)
    w = np.where(np.abs(w - 1.0) < _SNAP, 1.0, w)
    return lo, w, out


@lru_cache(maxsize=64)
def _stencils_cached(grid: Grid, actions: tuple[tuple[float, ...], ...]) -> tuple[Stencil, ...]:
    result = []
    for a in actions:
        per_axis = []
        for i, n in enumerate(grid.shape):
            s = a[i] / grid.dx[i]
            if abs(s - round(s)) < _SNAP:
                s = float(round(s))
            per_axis.append(_axis_stencil(n, s))
        mesh_lo = np.meshgrid(*[p[0] for p in per_axis], indexing="ij")
        mesh_w = np.meshgrid(*[p[1] for p in per_axis], indexing="ij")
        mesh_out = np.meshgrid(*[p[2] for p in per_axis], indexing="ij")
        clamped = int(np.count_nonzero(np.logical_or.reduce([m for m in mesh_out])))
        idx, wts = [], []
        for corner in itertools.product((0, 1), repeat=grid.dim):
            ijk = tuple((lo + c).ravel() for lo, c in zip(mesh_lo, corner))
            w = np.ones(grid.size)
            for wi, c in zip(mesh_w, corner):
                w = w * (wi.ravel() if c else 1.0 - wi.ravel())
            idx.append(np.ravel_multi_index(ijk, grid.shape))
            wts.append(w)
        result.append(Stencil(np.array(idx), np.array(wts), clamped))
    return tuple(result)


def action_stencils(grid: Grid, actions: NDArray) -> tuple[Stencil, ...]:
    key = tuple(tuple(float(v) for v in a) for a in np.asarray(actions, dtype=float).reshape(-1, grid.dim))
    return _stencils_cached(grid, key)


def interpolate(values: NDArray, grid: Grid, x: NDArray) -> NDArray:
    """Multilinear interpolation of a node array at points ``x`` (clamped to the box)."""
    x = grid.clamp(np.asarray(x, dtype=float))
    flat_shape = x.shape[:-1]
    x = x.reshape(-1, grid.dim)
    lo_idx, ws = [], []
    for i, ((lo, _), n) in enumerate(zip(grid.bounds, grid.shape)):
        s = (x[:, i] - lo) / grid.dx[i]
        j = np.clip(np.floor(s).astype(np.int64), 0, n - 2)
        lo_idx.append(j)
        ws.append(np.clip(s - j, 0.0, 1.0))
    out = np.zeros(len(x))
    for corner in itertools.product((0, 1), repeat=grid.dim):
        w = np.ones(len(x))
        ijk = []
        for j, wi, c in zip(lo_idx, ws, corner):
            w = w * (wi if c else 1.0 - wi)
            ijk.append(j + c)
        out += w * values[tuple(ijk)]
    return out.reshape(flat_shape)


def shifted_candidates(values: NDArray, grid: Grid, actions: NDArray, costs: NDArray, sign: float) -> NDArray:
    """Array ``(K, size)`` of ``V(x + a_k) + sign * cost_k`` over the flat grid."""
    flat = np.asarray(values, dtype=float).ravel()
    stencils = action_stencils(grid, actions)
    out = np.empty((len(stencils), grid.size))
    for k, st in enumerate(stencils):
        out[k] = st.apply(flat) + sign * costs[k]
    return out


def clamp_count(grid: Grid, spec: ProblemSpec) -> int:
    return sum(st.clamped for st in action_stencils(grid, spec.actions_I)) + sum(
        st.clamped for st in action_stencils(grid, spec.actions_II)
    )


def _check_finite(field: ValueField):
    if not np.all(np.isfinite(field.values)):
        raise ValueError("value slice contains non-finite entries")


def intervention_sup(field: ValueField, spec: ProblemSpec, cost_scale: float = 1.0) -> ValueField:
    """Best post-impulse value for player I net of cost: max_xi V(x + xi) - c(t, xi).

    ``cost_scale`` multiplies every cost (used by the exponentially scaled
    equation).  With no actions the result is ``-inf`` everywhere.
    """
    _check_finite(field)
    grid = field.grid
    if len(spec.actions_I) == 0:
        return field.with_values(np.full(grid.shape, -np.inf))
    costs = cost_scale * spec.cost_I(field.t, spec.actions_I)
    cand = shifted_candidates(field.values, grid, spec.actions_I, costs, -1.0)
    return field.with_values(cand.max(axis=0).reshape(grid.shape))


def intervention_inf(field: ValueField, spec: ProblemSpec, cost_scale: float = 1.0) -> ValueField:
    """Worst post-impulse value for player I after player II pays: min_eta V(x + eta) + chi(t, eta)."""
    _check_finite(field)
    grid = field.grid
    if len(spec.actions_II) == 0:
        return field.with_values(np.full(grid.shape, np.inf))
    costs = cost_scale * spec.cost_II(field.t, spec.actions_II)
    cand = shifted_candidates(field.values, grid, spec.actions_II, costs, +1.0)
    return field.with_values(cand.min(axis=0).reshape(grid.shape))


def diffusion_diagonal(spec: ProblemSpec, grid: Grid, t: float) -> NDArray:
    """Diagonal of sigma sigma^T at every node, shape ``(*shape, dim)``."""
    pts = grid.points.reshape(-1, grid.dim)
    sig = spec.diffusion(t, pts)
    return np.sum(sig**2, axis=-1).reshape(grid.shape + (grid.dim,))


def apply_local_operator(field: ValueField, spec: ProblemSpec, grid: Grid | None = None) -> ValueField:
    """Discrete ``<b, grad V> + 1/2 tr(sigma sigma^T D^2 V)``.

    Central second differences, upwind first differences.  On an edge the
    second difference along that axis is dropped and the first difference is
    kept only when its upwind neighbour exists; with ``DirichletFrozen`` the
    operator vanishes on every boundary node.
    """
    grid = grid or field.grid
    _check_finite(field)
    V = field.values
    pts = grid.points.reshape(-1, grid.dim)
    b = spec.drift(field.t, pts).reshape(grid.shape + (grid.dim,))
    a = diffusion_diagonal(spec, grid, field.t)
    out = np.zeros(grid.shape)
    for i, dx in enumerate(grid.dx):
        d = np.diff(V, axis=i) / dx
        pad_hi = [(0, 0)] * grid.dim
        pad_lo = [(0, 0)] * grid.dim
        pad_hi[i] = (0, 1)
        pad_lo[i] = (1, 0)
        fwd = np.pad(d, pad_hi)
        bwd = np.pad(d, pad_lo)
        second = (fwd - bwd) / dx
        edge = [slice(None)] * grid.dim
        edge[i] = 0
        second[tuple(edge)] = 0.0
        edge[i] = -1
        second[tuple(edge)] = 0.0
        bi = b[..., i]
        out += np.maximum(bi, 0.0) * fwd + np.minimum(bi, 0.0) * bwd + 0.5 * a[..., i] * second
    if grid.boundary == Boundary.DIRICHLET_FROZEN:
        out[~grid.interior()] = 0.0
    return field.with_values(out)
