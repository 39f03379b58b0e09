"""
Grids, the CFL bound and the two intervention operators
=======================================================

The explicit scheme is monotone only for dt below
1 / sum_i (a_ii / dx_i^2 + |b_i| / dx_i).  The intervention operators
shift a value slice by each admissible action and net out the cost.
"""

# %%
import numpy as np

from qvigame import Grid, GridRequest, ValueField, build_grid, check_cfl
from qvigame import apply_local_operator, intervention_inf, intervention_sup
from qvigame.grid import CFLError
from qvigame.reference import reference_problem

spec = reference_problem()
grid = build_grid(spec, GridRequest(((-2.0, 2.0),), (401,)))
ok, dt_max = check_cfl(spec, grid)
print(f"dx={grid.dx[0]}, dt_max={dt_max:.2e}, chosen steps={grid.time_steps}, dt={grid.dt:.2e}")

try:
    build_grid(spec, GridRequest(((-2.0, 2.0),), (401,), time_steps=100))
except CFLError as exc:
    print("rejected:", exc)

# %%
# On five nodes the operators can be checked by hand.
five = Grid(((-2.0, 2.0),), (5,), 1, 1.0)
tent = ValueField(np.array([0.0, 1.0, 2.0, 1.0, 0.0]), 0.0, five)
jumpy = spec.replace(actions_I=np.array([[1.0], [2.0]]), actions_II=np.array([[-1.0]]))
print("H_sup:", intervention_sup(tent, jumpy).values)
print("H_inf:", intervention_inf(tent, jumpy).values)

# %%
# The local operator is exact on quadratics: 0.5 * 0.25 * 2 = 0.25.
x = grid.axes[0]
print(apply_local_operator(ValueField(x**2, 0.0, grid), spec).values[1:6])
