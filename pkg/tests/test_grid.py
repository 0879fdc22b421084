import math

import numpy as np
import pytest

from stormreach.grid import GridSpec


def make_grid(**kw):
    base = dict(x_min=-100.0, x_max=100.0, n_x=10, y_min=-50.0, y_max=50.0,
                n_y=5, n_lambda=8, dt_minutes=2.0, n_steps=6)
    base.update(kw)
    return GridSpec(**base)


def test_spacings():
    g = make_grid()
    assert g.dx == 20.0
    assert g.dy == 20.0
    assert g.dlam == pytest.approx(2.0 * math.pi / 8)
    assert g.x_centers[0] == -90.0
    assert g.lambda_centers[0] == -math.pi
    assert g.lambda_centers[g.n_lambda // 2] == 0.0  # heading 0 is a grid point


def test_flat_unflat_round_trip():
    g = make_grid()
    idx = np.arange(g.n_states)
    ix, iy, il = g.unflat(idx)
    assert np.array_equal(g.flat(ix, iy, il), idx)


def test_state_index_and_lost():
    g = make_grid()
    assert g.state_index(1000.0, 0.0, 0.0) == g.lost_index
    idx = g.state_index(-90.0, -40.0, 0.0)
    x, y, lam = g.cell_center(idx)
    assert (x, y, lam) == (-90.0, -40.0, 0.0)


def test_heading_wraps():
    g = make_grid()
    assert g.heading_cell(math.pi - 1e-9) == 0  # wraps to the -pi cell
    assert g.heading_cell(-math.pi) == 0
    assert g.heading_cell(0.0) == g.n_lambda // 2


def test_goal_mask_counts_centers():
    g = make_grid()
    mask = g.goal_mask((-95.0, -65.0, -45.0, -25.0))
    assert mask.sum() == 2  # x centers -90, -70; y center -30
    with pytest.raises(ValueError):
        make_grid(n_x=1)


def test_validation():
    with pytest.raises(ValueError):
        make_grid(x_min=5.0, x_max=-5.0)
    with pytest.raises(ValueError):
        make_grid(n_steps=0)
