"""Ready-made game instances used by the tests, demos and docs."""

from __future__ import annotations

import numpy as np

from .grid import Grid, GridRequest, build_grid
from .problem import (
    AffineCost,
    AffineDrift,
    BumpGain,
    Cone,
    ConstantDiffusion,
    ConstantPayoff,
    HatPayoff,
    Priority,
    ProblemSpec,
    ZeroGain,
)

REFERENCE_BOUNDS = ((-2.0, 2.0),)
REFERENCE_NODES = (401,)


def reference_problem(priority: Priority = Priority.PLAYER_II) -> ProblemSpec:
    """1D game on which both players have non-empty intervention regions.

    Player I collects a running bump gain centred at the origin and pushes
    right; player II pushes left.  Costs are affine with strictly positive
    fixed parts and the terminal payoff is the unit hat.
    """
    return ProblemSpec(
        dim=1,
        horizon=1.0,
        drift=AffineDrift.make(1, A=0.0, beta=0.0),
        diffusion=ConstantDiffusion.make(1, 0.5),
        running_gain=BumpGain(amplitude=2.0, center=np.zeros(1), width=0.3),
        terminal_gain=HatPayoff(height=1.0, center=np.zeros(1), width=1.0),
        cost_I=AffineCost(fixed=0.3, proportional=1.2),
        cost_II=AffineCost(fixed=0.15, proportional=1.1),
        actions_I=np.array([[0.25], [0.5]]),
        actions_II=np.array([[-0.25], [-0.5]]),
        cone_I=Cone(("+",)),
        cone_II=Cone(("-",)),
        priority=priority,
        h=0.05,
    )


def reference_grid(spec: ProblemSpec | None = None, nodes: int = 401) -> Grid:
    spec = spec or reference_problem()
    return build_grid(spec, GridRequest(REFERENCE_BOUNDS, (nodes,)))


def constant_problem(value: float = 1.0, floor: float = 0.1) -> ProblemSpec:
    """f = 0, g = const, costs bounded below by ``floor``; the value is ``g`` everywhere."""
    return ProblemSpec(
        dim=1,
        horizon=1.0,
        drift=AffineDrift.make(1, A=0.0, beta=0.0),
        diffusion=ConstantDiffusion.make(1, 0.5),
        running_gain=ZeroGain(),
        terminal_gain=ConstantPayoff(value),
        cost_I=AffineCost(fixed=floor, proportional=1.2),
        cost_II=AffineCost(fixed=floor, proportional=1.1),
        actions_I=np.array([[0.25], [0.5]]),
        actions_II=np.array([[-0.25], [-0.5]]),
        cone_I=Cone(("+",)),
        cone_II=Cone(("-",)),
        h=0.02,
    )


def no_intervention_problem(floor: float = 10.0) -> ProblemSpec:
    """Hat payoff, pure diffusion, costs so large that no impulse ever pays."""
    return ProblemSpec(
        dim=1,
        horizon=1.0,
        drift=AffineDrift.make(1, A=0.0, beta=0.0),
        diffusion=ConstantDiffusion.make(1, 0.5),
        running_gain=ZeroGain(),
        terminal_gain=HatPayoff(height=1.0, center=np.zeros(1), width=1.0),
        cost_I=AffineCost(fixed=floor, proportional=1.2),
        cost_II=AffineCost(fixed=floor, proportional=1.1),
        actions_I=np.array([[0.25], [0.5]]),
        actions_II=np.array([[-0.25], [-0.5]]),
        cone_I=Cone(("+",)),
        cone_II=Cone(("-",)),
        h=0.02,
    )
