"""Feedback intervention strategies read off a solved value stack."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .operators import ValueField, shifted_candidates
from .problem import Priority, ProblemSpec
from .solver import SolveResult, continuation


class Regime(enum.IntEnum):
    CONTINUE = 0
    IMPULSE_I = 1
    IMPULSE_II = 2


@dataclass(frozen=True)
class PolicyMap:
    """Regime and chosen action per (slice, node).

    ``regimes`` has shape ``(time_steps + 1, size)`` over the flattened grid;
    ``action_index`` indexes ``spec.actions_I`` or ``spec.actions_II``
    according to the regime and is -1 where the regime is ``CONTINUE``.
    The terminal slice is always ``CONTINUE``.
    """

    regimes: NDArray
    action_index: NDArray
    actions_I: NDArray
    actions_II: NDArray

    def action(self, n: int, node: int) -> NDArray | None:
        r = self.regimes[n, node]
        if r == Regime.IMPULSE_I:
            return self.actions_I[self.action_index[n, node]]
        if r == Regime.IMPULSE_II:
            return self.actions_II[self.action_index[n, node]]
        return None

    def action_vectors(self, n: int) -> NDArray:
        """Chosen action per node of slice ``n`` (zeros where continuing)."""
        dim = self.actions_I.shape[1] if len(self.actions_I) else self.actions_II.shape[1]
        out = np.zeros((self.regimes.shape[1], dim))
        r, k = self.regimes[n], self.action_index[n]
        if len(self.actions_I):
            m = r == Regime.IMPULSE_I
            out[m] = self.actions_I[k[m]]
        if len(self.actions_II):
            m = r == Regime.IMPULSE_II
            out[m] = self.actions_II[k[m]]
        return out


def _tie_order(actions: NDArray) -> NDArray:
    # smallest magnitude first, then lexicographic by component
    if len(actions) == 0:
        return np.zeros(0, dtype=np.int64)
    keys = [actions[:, i] for i in range(actions.shape[1] - 1, -1, -1)]
    keys.append(np.linalg.norm(actions, axis=1))
    return np.lexsort(keys)


def _pick(cand: NDArray, order: NDArray, best: NDArray, tol: float, maximize: bool) -> NDArray:
    """First action in tie order whose candidate is within ``tol`` of the optimum."""
    ordered = cand[order]
    near = ordered >= best - tol if maximize else ordered <= best + tol
    return order[np.argmax(near, axis=0)]


def extract_policy(result: SolveResult, spec: ProblemSpec, grid=None, act_tol: float = 1e-8) -> PolicyMap:
    """Label each node as continuation or an impulse of one player.

    An impulse is recorded only where it is strictly profitable against the
    alternative it displaces (by more than ``act_tol``) and the obstacle binds
    (within ``act_tol``).  The priority player is labelled first.
    """
    grid = grid or result.grid
    N = grid.time_steps
    size = grid.size
    regimes = np.zeros((N + 1, size), dtype=np.int8)
    action_index = np.full((N + 1, size), -1, dtype=np.int64)
    order_I = _tie_order(spec.actions_I)
    order_II = _tie_order(spec.actions_II)
    for n in range(N):
        t = grid.time(n)
        V = result.stack[n].ravel()
        vc = continuation(ValueField(result.stack[n + 1], grid.time(n + 1), grid), spec).values.ravel()
        if len(spec.actions_I):
            cI = shifted_candidates(result.stack[n], grid, spec.actions_I, spec.cost_I(t, spec.actions_I), -1.0)
            hs = cI.max(axis=0)
        else:
            hs = np.full(size, -np.inf)
        if len(spec.actions_II):
            cII = shifted_candidates(result.stack[n], grid, spec.actions_II, spec.cost_II(t, spec.actions_II), +1.0)
            hi = cII.min(axis=0)
        else:
            hi = np.full(size, np.inf)

        binds_I = np.abs(V - hs) <= act_tol
        binds_II = np.abs(V - hi) <= act_tol
        if spec.priority == Priority.PLAYER_II:
            is_II = binds_II & (hi < np.maximum(hs, vc) - act_tol)
            is_I = ~is_II & binds_I & (hs > vc + act_tol)
        else:
            is_I = binds_I & (hs > np.minimum(hi, vc) + act_tol)
            is_II = ~is_I & binds_II & (hi < vc - act_tol)
        regimes[n, is_I] = Regime.IMPULSE_I
        regimes[n, is_II] = Regime.IMPULSE_II
        if is_I.any():
            action_index[n, is_I] = _pick(cI[:, is_I], order_I, hs[is_I], act_tol, True)
        if is_II.any():
            action_index[n, is_II] = _pick(cII[:, is_II], order_II, hi[is_II], act_tol, False)
    return PolicyMap(regimes, action_index, spec.actions_I, spec.actions_II)


def region_masks(policy: PolicyMap, grid=None) -> tuple[NDArray, NDArray]:
    """Integer masks (0 continue, 1 player I, 2 player II) and per-slice counts.

    With ``grid`` the masks are reshaped to ``(slices, *grid.shape)``.
    """
    masks = policy.regimes.astype(np.int64)
    counts = np.stack([np.count_nonzero(masks == r, axis=1) for r in Regime], axis=1)
    if grid is not None:
        masks = masks.reshape((masks.shape[0],) + grid.shape)
    return masks, counts


def regimes_from_masks(masks: NDArray) -> NDArray:
    return np.vectorize(Regime, otypes=[object])(np.asarray(masks))
