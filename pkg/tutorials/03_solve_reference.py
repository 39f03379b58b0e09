"""
Solving the reference game
==========================

Backward induction: an explicit continuation step, then the obstacle
fixed point W <- min(H_inf W, max(H_sup W, V_cont)) on every slice.
"""

# %%
import numpy as np

from qvigame import extract_policy, region_masks, solve_backward, solve_backward_transformed
from qvigame.reference import reference_grid, reference_problem

spec = reference_problem()
grid = reference_grid(spec)
result = solve_backward(spec, grid)
print(f"solved {grid.time_steps} slices in {result.wall_time:.1f} s")
print(f"V(0, 0) = {result.value_at(0, [0.0]):.4f}")
print("max fixed-point iterations:", result.iterations.max())
print("max residual:", result.residuals.max())

# %%
# The exponentially scaled equation gives the same stack.
scaled = solve_backward_transformed(spec, grid)
print("max |V - exp(-t) G| =", np.abs(scaled.stack - result.stack).max())

# %%
# Where does each player intervene at t = 0?
policy = extract_policy(result, spec)
masks, counts = region_masks(policy, grid)
x = grid.axes[0]
print("player II acts on", x[masks[0] == 2].min(), "..", x[masks[0] == 2].max())
print("player I nodes over all slices:", counts[:, 1].sum())
for n in (0, grid.time_steps // 2, grid.time_steps - 1):
    print(f"t={grid.time(n):.2f}: continue/I/II = {counts[n].tolist()}")
