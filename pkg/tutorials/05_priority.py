"""
Which impulse wins when both players want to act
================================================

By default only player II's impulse is kept; the alternative convention
keeps player I's and swaps the nesting of the obstacles.  The two only
disagree where jumping is worth more to player I than undoing it costs
player II, which the reference game rules out.
"""

# %%
import numpy as np

from qvigame import AffineCost, GridRequest, Priority, SolverOptions, build_grid, solve_backward
from qvigame.reference import reference_problem

base = reference_problem()
grid = build_grid(base, GridRequest(((-2.0, 2.0),), (201,)))
v2 = solve_backward(base, grid).stack
v1 = solve_backward(base.replace(priority=Priority.PLAYER_I), grid).stack
print("reference game, max difference:", np.abs(v1 - v2).max())

# %%
# A long cheap jump for player I that player II can only partly undo.
lopsided = base.replace(
    actions_I=np.array([[0.75]]),
    actions_II=np.array([[-0.25]]),
    cost_I=AffineCost(0.1, 0.2),
    cost_II=AffineCost(0.05, 0.3),
)
opts = SolverOptions(override_assumptions=True)  # the cheap jump breaks the terminal check
w2 = solve_backward(lopsided, grid, opts).stack
w1 = solve_backward(lopsided.replace(priority=Priority.PLAYER_I), grid, opts).stack
print("lopsided game, max difference:", np.abs(w1 - w2).max())
