"""Stochastic storm propagation and gridded probability-of-storm fields.

Cells are propagated to each forecast horizon by adding sampled center errors
and accumulated size changes, clustered, and each cluster's sampled
realizations are enclosed in minimum-volume ellipses. The per-point fraction
of enclosing ellipses estimates the probability that the point sits inside
the cluster; cluster fields merge into one field per horizon.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .cluster import kmeans, select_k
from .grid import GridSpec
from .mve import min_volume_ellipse
from .nowcast import NowcastFile, StormCellObservation
from .projection import PlanarFrame
from .stats import ErrorModelSet, planar_extent

MINUTES_PER_HORIZON = 10.0


@dataclass(frozen=True)
class StormCellState:
    """Planar storm-cell state: center, extremities, size, and motion."""

    center: tuple[float, float]  # (x, y) km
    west: float
    east: float
    south: float
    north: float
    pixels: int
    heading: float  # radians, East-counterclockwise, wrapped to [-pi, pi)
    speed: float  # km/h
    forecasts: tuple = ()  # projected (x, y) per horizon; None where absent

    @property
    def width(self) -> float:
        return self.east - self.west

    @property
    def height(self) -> float:
        return self.north - self.south

    def extremity_points(self) -> np.ndarray:
        cx, cy = self.center
        return np.array([[self.west, cy], [self.east, cy],
                         [cx, self.south], [cx, self.north]])

    def box(self) -> tuple[float, float, float, float]:
        return self.west, self.east, self.south, self.north


def heading_to_xi(direction_deg: float) -> float:
    """Compass degrees (clockwise from North) -> radians East-counterclockwise."""
    xi = math.radians(90.0 - direction_deg)
    return (xi + math.pi) % (2.0 * math.pi) - math.pi


def planar_cell(obs: StormCellObservation, frame: PlanarFrame) -> StormCellState:
    """Project one nowcast observation onto the planar frame."""
    cx, cy = frame.project(*obs.center)
    xw, xe, ys, yn = planar_extent(obs, frame)
    forecasts = tuple(
        frame.project(*fc) if fc is not None else None for fc in obs.center_forecasts)
    return StormCellState(center=(cx, cy), west=xw, east=xe, south=ys, north=yn,
                          pixels=obs.pixels, heading=heading_to_xi(obs.heading),
                          speed=obs.speed, forecasts=forecasts)


def forecast_center(cell: StormCellState, tau: int) -> tuple[float, float]:
    """Deterministic forecast center at horizon tau.

    Falls back to linear extrapolation from the nearest available horizon when
    the forecast is absent, and to the cell's own motion vector when the file
    carries no forecasts at all.
    """
    if tau >= 1 and tau <= len(cell.forecasts) and cell.forecasts[tau - 1] is not None:
        return cell.forecasts[tau - 1]
    available = [i + 1 for i, fc in enumerate(cell.forecasts) if fc is not None]
    if not available:
        dt_h = tau * MINUTES_PER_HORIZON / 60.0
        return (cell.center[0] + cell.speed * dt_h * math.cos(cell.heading),
                cell.center[1] + cell.speed * dt_h * math.sin(cell.heading))
    last = max(a for a in available if a <= tau) if any(a <= tau for a in available) \
        else min(available)
    px, py = cell.forecasts[last - 1]
    if last - 1 >= 1 and cell.forecasts[last - 2] is not None:
        qx, qy = cell.forecasts[last - 2]
        span = 1
    else:
        qx, qy = cell.center
        span = last
    rate = (tau - last) / span
    return (px + (px - qx) * rate, py + (py - qy) * rate)


def sample_cell_path(cell: StormCellState, models: ErrorModelSet, tau: int,
                     rng: np.random.Generator) -> StormCellState:
    """One stochastic realization of the cell at horizon tau.

    The forecast center is corrected by a sampled logistic error; extremities
    keep their offsets relative to the current center and spread by half the
    accumulated size change, one draw per 10-minute step.
    """
    if tau not in models.center_x:
        raise ValueError(f"horizon {tau} outside fitted model range {models.horizons}")
    fx, fy = forecast_center(cell, tau)
    cx = fx + float(models.center_x[tau].sample(rng))
    cy = fy + float(models.center_y[tau].sample(rng))
    dw = float(np.sum(models.width_growth.at(cell.pixels).sample(rng, size=tau)))
    dh = float(np.sum(models.height_growth.at(cell.pixels).sample(rng, size=tau)))
    x0, y0 = cell.center
    west = cx + (cell.west - x0) - dw / 2.0
    east = cx + (cell.east - x0) + dw / 2.0
    south = cy + (cell.south - y0) - dh / 2.0
    north = cy + (cell.north - y0) + dh / 2.0
    if west > east:  # cell decayed below zero width; collapse to the midpoint
        west = east = (west + east) / 2.0
    if south > north:
        south = north = (south + north) / 2.0
    return replace(cell, center=(cx, cy), west=west, east=east, south=south, north=north)


@dataclass(frozen=True)
class StormField:
    """Per-horizon probability of storm on the planner grid.

    values[tau] is indexed [ix, iy]; tau = 0 is the deterministic union of
    observed cell boxes, tau >= 1 are Monte Carlo ellipse-containment fields.
    """

    grid: GridSpec
    values: np.ndarray  # (n_tau + 1, n_x, n_y), each in [0, 1]
    n_samples: int

    @property
    def n_horizons(self) -> int:
        return self.values.shape[0] - 1


def merge_cluster_fields(cluster_probs) -> np.ndarray:
    """Probability of at least one cluster covering a point: 1 - prod(1 - p_k)."""
    cluster_probs = np.asarray(cluster_probs, dtype=float)
    if cluster_probs.size == 0:
        raise ValueError("need at least one cluster field to merge")
    return 1.0 - np.prod(1.0 - cluster_probs, axis=0)


def default_heading_weight(grid: GridSpec) -> float:
    """Scale making one half-turn of heading commensurate with the domain radius."""
    return grid.half_diagonal() / math.pi


def _boxes_field(cells, grid: GridSpec) -> np.ndarray:
    xs = grid.x_centers[:, None]
    ys = grid.y_centers[None, :]
    field = np.zeros((grid.n_x, grid.n_y))
    for c in cells:
        field = np.maximum(
            field,
            ((xs >= c.west) & (xs <= c.east) & (ys >= c.south) & (ys <= c.north))
            .astype(float))
    return field


def build_storm_field(nowcast: NowcastFile, frame: PlanarFrame, models: ErrorModelSet,
                      grid: GridSpec, clusters, n_samples: int,
                      rng: np.random.Generator, n_horizons: int | None = None,
                      heading_weight: float | None = None,
                      mve_tolerance: float = 1e-4) -> StormField:
    """Assemble the probability-of-storm field for every forecast horizon.

    `clusters` is a fixed cluster count or "auto" for elbow selection. Each
    cluster draws `n_samples` joint realizations of its member cells from a
    pre-split rng stream, so the result is deterministic for a given seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    taus = n_horizons if n_horizons is not None else models.max_horizon()
    if taus > models.max_horizon():
        raise ValueError(f"requested {taus} horizons but models stop at "
                         f"{models.max_horizon()}")
    cells = [planar_cell(o, frame) for o in nowcast.cells]
    w_xi = default_heading_weight(grid) if heading_weight is None else heading_weight
    values = np.zeros((taus + 1, grid.n_x, grid.n_y))
    values[0] = _boxes_field(cells, grid)
    if not cells:
        return StormField(grid=grid, values=values, n_samples=n_samples)

    grid_pts = np.stack(np.meshgrid(grid.x_centers, grid.y_centers, indexing="ij"),
                        axis=-1).reshape(-1, 2)
    for tau in range(1, taus + 1):
        tau_rng = rng.spawn(1)[0]
        centers = np.array([forecast_center(c, tau) for c in cells])
        features = np.column_stack(
            [centers, w_xi * np.array([c.heading for c in cells])])
        if clusters == "auto":
            k = select_k(features, k_max=min(20, len(cells)), rng=tau_rng)
        else:
            k = min(int(clusters), len(cells))
        assignment = kmeans(features, k, tau_rng)
        cluster_rngs = tau_rng.spawn(k)
        cluster_probs = np.empty((k, grid.n_x * grid.n_y))
        for ci in range(k):
            members = [cells[i] for i in np.flatnonzero(assignment.labels == ci)]
            if not members:
                cluster_probs[ci] = 0.0
                continue
            counts = np.zeros(grid.n_x * grid.n_y)
            for _ in range(n_samples):
                pts = np.concatenate([
                    sample_cell_path(c, models, tau, cluster_rngs[ci]).extremity_points()
                    for c in members])
                ellipse = min_volume_ellipse(pts, tolerance=mve_tolerance)
                counts += ellipse.contains(grid_pts, tol=mve_tolerance)
            cluster_probs[ci] = counts / n_samples
        values[tau] = merge_cluster_fields(cluster_probs).reshape(grid.n_x, grid.n_y)
    return StormField(grid=grid, values=values, n_samples=n_samples)


def interpolate_field(field: StormField, t_minutes: float) -> np.ndarray:
    """Probability grid at an arbitrary time, linear in time between horizons."""
    t_max = MINUTES_PER_HORIZON * field.n_horizons
    if t_minutes < 0.0 or t_minutes > t_max:
        warnings.warn(f"time {t_minutes:.1f} min outside [0, {t_max:.0f}]; clamping")
        t_minutes = min(max(t_minutes, 0.0), t_max)
    lo = int(t_minutes // MINUTES_PER_HORIZON)
    if lo >= field.n_horizons:
        return field.values[field.n_horizons].copy()
    frac = (t_minutes - lo * MINUTES_PER_HORIZON) / MINUTES_PER_HORIZON
    return (1.0 - frac) * field.values[lo] + frac * field.values[lo + 1]
