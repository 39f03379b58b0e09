import math

import numpy as np
import pytest

from qvigame import AffineDrift, ConstantDiffusion, Grid, GridRequest, ZeroGain, build_grid, check_cfl
from qvigame.grid import CFLError
from qvigame.reference import reference_problem


def test_five_node_coordinates():
    grid = build_grid(reference_problem(), GridRequest(((-2.0, 2.0),), (5,), time_steps=10))
    assert grid.axes[0].tolist() == [-2.0, -1.0, 0.0, 1.0, 2.0]
    assert grid.dx == (1.0,)


def test_reference_dt_accepted_and_rejected():
    spec = reference_problem()
    grid = build_grid(spec, GridRequest(((-2.0, 2.0),), (401,), time_steps=10_000))
    assert grid.dt == pytest.approx(1e-4)
    with pytest.raises(CFLError) as err:
        build_grid(spec, GridRequest(((-2.0, 2.0),), (401,), time_steps=100))
    # the message names the bound so the user can pick a step count
    assert "0.0004" in str(err.value)


def test_dt_max_pure_diffusion():
    grid = Grid(((-2.0, 2.0),), (401,), 1, 1.0)
    ok, dt_max = check_cfl(reference_problem(), grid)
    assert not ok
    assert dt_max == pytest.approx(1.0 / (0.25 / 1e-4), rel=1e-12)


def test_dt_max_pure_drift():
    spec = reference_problem().replace(
        drift=AffineDrift.make(1, beta=[1.0]), diffusion=ConstantDiffusion.make(1, 0.0)
    )
    _, dt_max = check_cfl(spec, Grid(((-2.0, 2.0),), (401,), 1, 1.0))
    assert dt_max == pytest.approx(0.01, rel=1e-12)


def test_dt_max_affine_drift_uses_grid_maximum():
    spec = reference_problem().replace(drift=AffineDrift.make(1, A=[[1.0]]))
    grid = Grid(((-2.0, 2.0),), (401,), 1, 1.0)
    # brute force over nodes: |b| peaks at the edge x = 2
    b_max = max(abs(x) for x in grid.axes[0])
    dx = grid.dx[0]
    oracle = 1.0 / (0.25 / dx**2 + b_max / dx)
    _, dt_max = check_cfl(spec, grid)
    assert dt_max == pytest.approx(oracle, rel=1e-12)
    assert dt_max == pytest.approx(1.0 / 2700.0, rel=1e-9)


def test_degenerate_zero_coefficients_give_unbounded_step():
    spec = reference_problem().replace(diffusion=ConstantDiffusion.make(1, 0.0))
    _, dt_max = check_cfl(spec, Grid(((-2.0, 2.0),), (41,), 1, 1.0))
    assert math.isinf(dt_max)
    assert build_grid(spec, GridRequest(((-2.0, 2.0),), (41,))).time_steps == 1


@pytest.mark.parametrize("nodes", [41, 81, 161])
def test_halving_dx_quarters_dt_max(nodes):
    spec = reference_problem()
    _, coarse = check_cfl(spec, Grid(((-2.0, 2.0),), (nodes,), 1, 1.0))
    _, fine = check_cfl(spec, Grid(((-2.0, 2.0),), (2 * nodes - 1,), 1, 1.0))
    assert coarse / fine == pytest.approx(4.0, rel=1e-12)


def test_automatic_step_count_meets_bound():
    spec = reference_problem()
    grid = build_grid(spec, GridRequest(((-2.0, 2.0),), (401,)))
    _, dt_max = check_cfl(spec, grid)
    assert grid.dt <= dt_max
    assert spec.horizon / (grid.time_steps - 1) > dt_max


def test_coordinates_bit_identical():
    a = Grid(((-2.0, 2.0),), (401,), 10, 1.0)
    b = Grid(((-2.0, 2.0),), (401,), 10, 1.0)
    for j in (0, 1, 7, 200, 333, 400):
        x = a.coordinate(0, j)
        assert x == b.coordinate(0, j) == a.axes[0][j]
        assert x == -2.0 + j * a.dx[0]


def test_grid_rejects_degenerate():
    with pytest.raises(ValueError):
        Grid(((1.0, 1.0),), (5,), 1, 1.0)
    with pytest.raises(ValueError):
        Grid(((0.0, 1.0),), (2,), 1, 1.0)
    with pytest.raises(ValueError):
        build_grid(reference_problem(), GridRequest(((0.0, 1.0), (0.0, 1.0)), (5, 5)))


def test_offgrid_actions_recorded():
    grid = build_grid(reference_problem(), GridRequest(((-2.0, 2.0),), (401,)))
    assert grid.max_action == 0.5
    # 25 nodes within 0.25 of an edge for each of the 0.25 actions, 50 for the 0.5 ones
    assert grid.offgrid_pairs == 2 * (25 + 50)


def test_nearest_index_and_clamp():
    grid = Grid(((-2.0, 2.0),), (5,), 1, 1.0)
    idx = grid.nearest_index(np.array([[-3.0], [-0.6], [0.4], [9.0]]))
    assert idx.tolist() == [0, 1, 2, 4]
    assert grid.clamp(np.array([[5.0]])).tolist() == [[2.0]]


def test_two_dimensional_grid():
    spec = reference_problem()
    spec2 = spec.replace(
        dim=2,
        drift=AffineDrift.make(2),
        diffusion=ConstantDiffusion.make(2, 0.5),
        running_gain=ZeroGain(),
        terminal_gain=spec.terminal_gain.__class__(1.0, np.zeros(2), 1.0),
        actions_I=np.array([[0.25, 0.0]]),
        actions_II=np.array([[-0.25, 0.0]]),
        cone_I=spec.cone_I.__class__(("+", "+")),
        cone_II=spec.cone_II.__class__(("-", "-")),
    )
    grid = build_grid(spec2, GridRequest(((-1.0, 1.0), (-1.0, 1.0)), (21, 11)))
    _, dt_max = check_cfl(spec2, grid)
    assert dt_max == pytest.approx(1.0 / (0.25 / 0.1**2 + 0.25 / 0.2**2))
    assert grid.points.shape == (21, 11, 2)
