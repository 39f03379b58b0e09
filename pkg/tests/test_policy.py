import numpy as np
import pytest

from qvigame import AffineCost, Priority, Regime, SolverOptions, extract_policy, region_masks, solve_backward
from qvigame.operators import interpolate
from qvigame.policy import _pick, _tie_order, regimes_from_masks
from qvigame.reference import no_intervention_problem


def test_huge_costs_give_all_continue(coarse_grid):
    spec = no_intervention_problem()
    result = solve_backward(spec, coarse_grid)
    policy = extract_policy(result, spec)
    masks, counts = region_masks(policy)
    assert not masks.any()
    assert np.all(counts[:, 0] == coarse_grid.size)
    assert np.all(policy.action_index == -1)


def test_nearly_free_player_II_saturates(ref_spec, coarse_grid):
    spec = ref_spec.replace(cost_II=AffineCost(1e-4, 0.0))
    result = solve_backward(spec, coarse_grid, SolverOptions(override_assumptions=True))
    policy = extract_policy(result, spec)
    _, counts = region_masks(policy)
    # pushing left is almost free, so wherever the value slopes down to the
    # left of the node (x > -2 + 0.25 near the bump) player II moves the state
    assert counts[0, 2] > 0.4 * coarse_grid.size
    assert counts[:, 1].sum() == 0


def test_reference_regions(ref_spec, ref_grid, ref_policy):
    masks, counts = region_masks(ref_policy, ref_grid)
    assert masks.shape == (ref_grid.time_steps + 1,) + ref_grid.shape
    assert np.all(counts.sum(axis=1) == ref_grid.size)
    assert counts[0, 2] > 0
    # player II acts just left of the bump at t = 0
    x = ref_grid.axes[0][masks[0] == 2]
    assert x.min() > -0.5 and x.max() < 0.0
    assert not masks[-1].any()


def test_masks_round_trip(ref_policy):
    masks, _ = region_masks(ref_policy)
    back = regimes_from_masks(masks)
    assert np.array_equal(np.vectorize(int)(back), ref_policy.regimes)
    assert back[0, 0] in set(Regime)


def test_impulse_II_is_optimal_within_tolerance(ref_spec, ref_grid, ref_solution, ref_policy):
    act_tol = 1e-8
    pts = ref_grid.points.reshape(-1, 1)
    for n in range(0, ref_grid.time_steps, 50):
        nodes = np.flatnonzero(ref_policy.regimes[n] == Regime.IMPULSE_II)
        if nodes.size == 0:
            continue
        eta = ref_policy.action_vectors(n)[nodes]
        post = interpolate(ref_solution.stack[n], ref_grid, pts[nodes] + eta)
        chi = np.array([ref_spec.cost_II(ref_grid.time(n), e) for e in eta]).ravel()
        assert np.all(np.abs(ref_solution.stack[n].ravel()[nodes] - (post + chi)) <= 2 * act_tol)


def test_labels_exclusive(ref_policy):
    r = ref_policy.regimes
    assert set(np.unique(r)) <= {0, 1, 2}
    idx = ref_policy.action_index
    assert np.all((idx >= 0) == (r != Regime.CONTINUE))


def test_tie_break_prefers_smallest_then_lexicographic():
    actions = np.array([[0.5, 0.0], [0.0, 0.25], [0.25, 0.0], [0.0, -0.25]])
    # norms 0.5, 0.25, 0.25, 0.25; among the short ones (0,-0.25) < (0,0.25) < (0.25,0)
    assert _tie_order(actions).tolist() == [3, 1, 2, 0]
    cand = np.array([[1.0], [0.9], [1.0], [0.5]])
    assert _pick(cand, _tie_order(actions), np.array([1.0]), 1e-8, True).tolist() == [2]
    assert _pick(cand, _tie_order(actions), np.array([0.5]), 1e-8, False).tolist() == [3]


def test_player_I_priority_labels_player_I_first(coarse_grid, ref_spec):
    spec = ref_spec.replace(
        actions_I=np.array([[0.75]]),
        actions_II=np.array([[-0.25]]),
        cost_I=AffineCost(0.1, 0.2),
        cost_II=AffineCost(0.05, 0.3),
    )
    opts = SolverOptions(override_assumptions=True)
    counts = {}
    for prio in Priority:
        s = spec.replace(priority=prio)
        policy = extract_policy(solve_backward(s, coarse_grid, opts), s)
        counts[prio] = region_masks(policy)[1].sum(axis=0)
    assert counts[Priority.PLAYER_I][1] >= counts[Priority.PLAYER_II][1]
    assert counts[Priority.PLAYER_I][1] > 0
