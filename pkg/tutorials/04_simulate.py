"""
Monte Carlo under the extracted policies
========================================

Simulate the controlled diffusion with both players following the
feedback maps read off the solved stack, and compare the mean payoff with
the solver's value.  The same machinery checks the dynamic programming
identity at an intermediate time and the decay of impulse counts.
"""

# %%
from qvigame import SimConfig, check_dpp, check_impulse_tail, extract_policy, simulate, solve_backward
from qvigame.reference import reference_grid, reference_problem

spec = reference_problem()
grid = reference_grid(spec, nodes=201)
result = solve_backward(spec, grid)
policy = extract_policy(result, spec)

cfg = SimConfig(paths=20_000, seed=7)
report = simulate(spec, grid, result, policy, cfg)
print(f"J = {report.J_mean:.4f} +- {report.J_stderr:.4f}, V = {report.value:.4f}")
print("breakdown:", {k: round(v, 4) for k, v in report.breakdown.items()})

# %%
tail = check_impulse_tail(report)
print("P[N >= n], n = 1..:", [round(p, 4) for p in report.tail])
print(f"fitted C = {tail.C:.3f}, nonincreasing = {tail.nonincreasing}")

# %%
# Stop at the middle slice, then complete with the solver's value there.
s = grid.time(grid.time_steps // 2)
dpp = check_dpp(spec, grid, result, policy, cfg, s=s)
print(f"DPP residual at s = {s:.4f}: {dpp.residual:+.4f} (stderr {dpp.stderr:.4f})")
