import math

import numpy as np
import pytest

from stormreach.grid import GridSpec
from stormreach.nowcast import NowcastFile
from stormreach.projection import IBERIA_FRAME
from stormreach.scenario import BASE_TIME
from stormreach.stats import ErrorModelSet, GrowthModel, LogisticModel
from stormreach.stormfield import (StormCellState, StormField, build_storm_field,
                                   forecast_center, heading_to_xi,
                                   interpolate_field, merge_cluster_fields,
                                   sample_cell_path)

SIGMA_FACTOR = math.pi / math.sqrt(3.0)


def model_set(center_s=0.0, center_m=0.0, growth_m=0.0, growth_s=0.0,
              horizons=(1, 2, 3, 4)):
    center = {t: LogisticModel(center_m, center_s) for t in horizons}
    growth = GrowthModel(m=growth_m, scale_a=growth_s, scale_b=0.0,
                         scale_min=growth_s, size_dependent=False)
    return ErrorModelSet(center_x=dict(center), center_y=dict(center),
                         width_growth=growth, height_growth=growth)


def cell_at(x=0.0, y=0.0, w=20.0, h=10.0, forecasts=(), pixels=150):
    fcs = tuple(forecasts) + (None,) * (6 - len(forecasts))
    return StormCellState(center=(x, y), west=x - w / 2, east=x + w / 2,
                          south=y - h / 2, north=y + h / 2, pixels=pixels,
                          heading=0.5, speed=30.0, forecasts=fcs)


def grid_spec(n_steps=6):
    return GridSpec(x_min=-100.0, x_max=100.0, n_x=20, y_min=-100.0,
                    y_max=100.0, n_y=20, n_lambda=8, dt_minutes=2.0,
                    n_steps=n_steps)


# -- single-cell propagation ----------------------------------------------------

def test_zero_noise_keeps_forecast_and_size():
    cell = cell_at(forecasts=[(10.0, 5.0), (20.0, 10.0)])
    out = sample_cell_path(cell, model_set(), 2, np.random.default_rng(0))
    assert out.center == (20.0, 10.0)
    assert out.width == pytest.approx(20.0)
    assert out.height == pytest.approx(10.0)
    assert out.west == pytest.approx(10.0)  # offsets ride along with the center


def test_deterministic_growth_accumulates_per_step():
    cell = cell_at(forecasts=[(5.0, 0.0), (10.0, 0.0), (15.0, 0.0)])
    models = model_set(growth_m=2.0)
    out = sample_cell_path(cell, models, 3, np.random.default_rng(0))
    assert out.center == (15.0, 0.0)
    assert out.width == pytest.approx(20.0 + 6.0)  # +2 km per 10-min step
    assert out.east - out.center[0] == pytest.approx(13.0)


def test_center_error_spread_matches_sigma_relation():
    cell = cell_at(forecasts=[(0.0, 0.0)])
    models = model_set(center_s=1.0)
    rng = np.random.default_rng(99)
    xs = np.array([sample_cell_path(cell, models, 1, rng).center[0]
                   for _ in range(10_000)])
    assert abs(xs.std() - SIGMA_FACTOR) / SIGMA_FACTOR < 0.02


def test_horizon_outside_models_rejected():
    with pytest.raises(ValueError, match="horizon"):
        sample_cell_path(cell_at(), model_set(horizons=(1, 2)), 5,
                         np.random.default_rng(0))


def test_size_collapse_stops_at_zero_width():
    cell = cell_at(w=4.0)
    models = model_set(growth_m=-50.0)  # massive decay in one step
    out = sample_cell_path(cell, models, 1, np.random.default_rng(0))
    assert out.width == 0.0
    assert out.east == out.west


def test_forecast_extrapolation_beyond_lifetime():
    # Forecasts stop at horizon 2; horizon 4 extrapolates the last segment.
    cell = cell_at(forecasts=[(10.0, 0.0), (20.0, 0.0)])
    assert forecast_center(cell, 4) == (40.0, 0.0)
    # No forecasts at all: fall back to the cell's own motion vector.
    bare = cell_at()
    fx, fy = forecast_center(bare, 3)
    dist = math.hypot(fx - bare.center[0], fy - bare.center[1])
    assert dist == pytest.approx(30.0 * 0.5)  # 30 km/h for 30 min


def test_heading_conversion():
    assert heading_to_xi(90.0) == pytest.approx(0.0)  # East
    assert heading_to_xi(0.0) == pytest.approx(math.pi / 2)  # North
    assert heading_to_xi(180.0) == pytest.approx(-math.pi / 2)  # South


# -- merge formula ---------------------------------------------------------------

def test_merge_two_halves():
    assert merge_cluster_fields([0.5, 0.5]) == pytest.approx(0.75)


def test_merge_bounds_random_vectors():
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        p = rng.uniform(size=rng.integers(1, 6))
        merged = merge_cluster_fields(p)
        assert merged >= p.max() - 1e-12
        assert merged <= min(1.0, p.sum()) + 1e-12
        assert merged == pytest.approx(1.0 - np.prod(1.0 - p))


# -- field assembly ----------------------------------------------------------------

def nowcast_from_planar(cells):
    frame = IBERIA_FRAME
    from tests_helpers import observation_from_planar
    return NowcastFile(issue_time=BASE_TIME, cells=tuple(
        observation_from_planar(frame, i + 1, c) for i, c in enumerate(cells)))


def test_single_cluster_zero_noise_binary_field():
    grid = grid_spec()
    cells = [cell_at(x=0.0, y=0.0, forecasts=[(10.0, 0.0)]),
             cell_at(x=10.0, y=20.0, forecasts=[(20.0, 20.0)])]
    nc = nowcast_from_planar(cells)
    field = build_storm_field(nc, IBERIA_FRAME, model_set(horizons=(1,)), grid,
                              clusters=1, n_samples=1,
                              rng=np.random.default_rng(0), n_horizons=1)
    vals = np.unique(field.values[1])
    assert set(vals).issubset({0.0, 1.0})
    assert field.values[1].max() == 1.0


def test_tau0_is_union_of_observed_boxes():
    grid = grid_spec()
    cells = [cell_at(x=-50.0, y=-50.0, w=30.0, h=30.0),
             cell_at(x=55.0, y=55.0, w=30.0, h=30.0)]
    nc = nowcast_from_planar(cells)
    field = build_storm_field(nc, IBERIA_FRAME, model_set(horizons=(1,)), grid,
                              clusters=1, n_samples=1,
                              rng=np.random.default_rng(0), n_horizons=1)
    tau0 = field.values[0]
    assert set(np.unique(tau0)).issubset({0.0, 1.0})
    ix, iy = grid.position_cell(-50.0, -50.0)
    assert tau0[ix, iy] == 1.0
    ix, iy = grid.position_cell(90.0, -90.0)
    assert tau0[ix, iy] == 0.0


def test_empty_nowcast_gives_zero_field():
    grid = grid_spec()
    nc = NowcastFile(issue_time=BASE_TIME, cells=())
    field = build_storm_field(nc, IBERIA_FRAME, model_set(), grid, clusters=1,
                              n_samples=5, rng=np.random.default_rng(0))
    assert field.values.shape[0] == 5  # tau 0..4
    assert np.all(field.values == 0.0)


def test_field_values_in_unit_interval_and_deterministic():
    grid = grid_spec()
    rng_cells = np.random.default_rng(5)
    cells = [cell_at(x=float(rng_cells.uniform(-60, 60)),
                     y=float(rng_cells.uniform(-60, 60)),
                     forecasts=[(float(rng_cells.uniform(-60, 60)),
                                 float(rng_cells.uniform(-60, 60)))])
             for _ in range(6)]
    nc = nowcast_from_planar(cells)
    models = model_set(center_s=3.0, growth_m=1.0, growth_s=1.0, horizons=(1,))
    build = lambda: build_storm_field(nc, IBERIA_FRAME, models, grid,
                                      clusters=2, n_samples=40,
                                      rng=np.random.default_rng(77),
                                      n_horizons=1)
    f1, f2 = build(), build()
    assert np.all(f1.values >= 0.0) and np.all(f1.values <= 1.0)
    assert np.array_equal(f1.values, f2.values)  # bit-identical given the seed


def test_fixed_rng_doubling_samples_converges():
    grid = grid_spec()
    cells = [cell_at(x=0.0, y=0.0, forecasts=[(5.0, 5.0)])]
    nc = nowcast_from_planar(cells)
    models = model_set(center_s=4.0, growth_s=2.0, horizons=(1,))
    n_s = 200
    fields = {}
    for n in (n_s, 2 * n_s):
        fields[n] = build_storm_field(nc, IBERIA_FRAME, models, grid,
                                      clusters=1, n_samples=n,
                                      rng=np.random.default_rng(123),
                                      n_horizons=1)
    diff = np.max(np.abs(fields[n_s].values[1] - fields[2 * n_s].values[1]))
    bound = 2.0 / math.sqrt(n_s) + 2.576 * 0.5 / math.sqrt(n_s)
    assert diff <= bound


# -- time interpolation -----------------------------------------------------------

def field_from_values(grid, values):
    return StormField(grid=grid, values=np.asarray(values, dtype=float),
                      n_samples=1)


def test_interpolation_exact_at_horizons_and_midpoint():
    grid = grid_spec()
    v = np.zeros((3, grid.n_x, grid.n_y))
    v[1, 3, 4] = 0.2
    v[2, 3, 4] = 0.4
    field = field_from_values(grid, v)
    assert np.array_equal(interpolate_field(field, 10.0), v[1])
    assert interpolate_field(field, 15.0)[3, 4] == pytest.approx(0.3)


def test_interpolation_clamps_with_warning():
    grid = grid_spec()
    v = np.zeros((2, grid.n_x, grid.n_y))
    v[1, 0, 0] = 0.7
    field = field_from_values(grid, v)
    with pytest.warns(UserWarning, match="clamping"):
        out = interpolate_field(field, 25.0)
    assert out[0, 0] == 0.7


def test_interpolation_stays_in_unit_interval():
    grid = grid_spec()
    rng = np.random.default_rng(9)
    v = rng.uniform(size=(4, grid.n_x, grid.n_y))
    field = field_from_values(grid, v)
    for t in rng.uniform(0.0, 30.0, size=50):
        out = interpolate_field(field, float(t))
        assert np.all(out >= 0.0) and np.all(out <= 1.0)
