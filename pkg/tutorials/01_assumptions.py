"""
Checking the standing assumptions
=================================

A game is only well posed when costs have a positive floor, are
subadditive, make a last-instant impulse pointless, and leave player II a
strict margin when undoing player I.  ``validate_assumptions`` samples each
condition on a lattice and reports a margin plus a witness when it fails.
"""

# %%
import numpy as np

from qvigame import AffineCost, validate_assumptions
from qvigame.reference import reference_problem

spec = reference_problem()
report = validate_assumptions(spec)
for check in report.checks:
    print(f"{check.name:22s} passed={check.passed!s:5s} margin={check.margin:+.4f}")
print("overall:", report.overall)

# %%
# Cheap proportional costs make a jump at the horizon pay off: from x = -1
# player I jumps to the peak of the hat for 0.3 + 0.5 = 0.8 and gains 1.
cheap = spec.replace(cost_I=AffineCost(0.3, 0.5), actions_I=np.array([[0.25], [0.5], [1.0]]))
failed = validate_assumptions(cheap)["no_terminal_impulse"]
print(failed.passed, failed.margin, failed.witness)

# %%
# A zero fixed cost removes the floor k.
free = spec.replace(cost_II=AffineCost(0.0, 1.1))
print(validate_assumptions(free)["cost_floor"])
