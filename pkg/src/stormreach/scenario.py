"""Synthetic nowcast scenarios with scripted storm motion and growth.

Generators write a 10-minute nowcast archive (for model fitting), the
planning nowcast, the scripted "observed" cell boxes used to validate
rollouts, and a ready-to-run YAML configuration. Truth paths are linear in
position; sizes follow a seeded logistic random walk; forecasts are the true
future centers plus horizon-dependent logistic noise, so the fitting stage
has real structure to recover.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import yaml

from .nowcast import N_HORIZONS, NowcastFile, StormCellObservation, serialize_nowcast
from .projection import IBERIA_FRAME, PlanarFrame
from .rollout import ObservedCells

BASE_TIME = datetime(2016, 12, 19, 0, 0, tzinfo=timezone.utc)
MIN_CELL_SIZE_KM = 4.0


@dataclass(frozen=True)
class ScriptedCell:
    cell_id: int
    x0: float  # planar km at scenario minute 0
    y0: float
    vx: float  # km/h
    vy: float
    width0: float  # km
    height0: float
    pixels: int

    def center_at(self, minutes: float) -> tuple[float, float]:
        return (self.x0 + self.vx * minutes / 60.0,
                self.y0 + self.vy * minutes / 60.0)

    def compass_heading(self) -> float:
        return (90.0 - math.degrees(math.atan2(self.vy, self.vx))) % 360.0

    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class ScenarioTruth:
    """Deterministic centers plus seeded size walks, on 10-minute marks."""

    cells: tuple
    marks: tuple  # minutes, ascending, 10 apart
    sizes: dict  # (cell_id, mark) -> (width, height)

    def box_at(self, cell: ScriptedCell, mark: int):
        cx, cy = cell.center_at(mark)
        w, h = self.sizes[(cell.cell_id, mark)]
        return cx - w / 2.0, cx + w / 2.0, cy - h / 2.0, cy + h / 2.0


def _logistic_draw(rng: np.random.Generator, m: float, s: float) -> float:
    u = min(max(rng.uniform(), 1e-12), 1.0 - 1e-12)
    return m + s * math.log(u / (1.0 - u))


def build_truth(cells, first_mark: int, last_mark: int, rng: np.random.Generator,
                growth_m: float = 1.0, growth_a: float = 0.2,
                growth_b: float = 0.15) -> ScenarioTruth:
    """Roll the size random walk forward; growth scale rises with ln(pixels)."""
    marks = tuple(range(first_mark, last_mark + 10, 10))
    sizes = {}
    for cell in cells:
        scale = growth_a + growth_b * math.log(cell.pixels)
        w, h = cell.width0, cell.height0
        sizes[(cell.cell_id, marks[0])] = (w, h)
        for mark in marks[1:]:
            w = max(MIN_CELL_SIZE_KM, w + _logistic_draw(rng, growth_m, scale))
            h = max(MIN_CELL_SIZE_KM, h + _logistic_draw(rng, growth_m, scale))
            sizes[(cell.cell_id, mark)] = (w, h)
    return ScenarioTruth(cells=tuple(cells), marks=marks, sizes=sizes)


def _observation(truth: ScenarioTruth, cell: ScriptedCell, mark: int,
                 frame: PlanarFrame, rng: np.random.Generator,
                 err_scale: float, n_horizons: int) -> StormCellObservation:
    west, east, south, north = truth.box_at(cell, mark)
    cx, cy = cell.center_at(mark)
    lon_c, lat_c = frame.unproject(cx, cy)
    lon_w, _ = frame.unproject(west, cy)
    lon_e, _ = frame.unproject(east, cy)
    _, lat_s = frame.unproject(cx, south)
    _, lat_n = frame.unproject(cx, north)
    w, h = truth.sizes[(cell.cell_id, mark)]
    forecasts = []
    for tau in range(1, N_HORIZONS + 1):
        if tau > n_horizons:
            forecasts.append(None)
            continue
        tx, ty = cell.center_at(mark + 10 * tau)
        s = err_scale * math.sqrt(tau)
        fx = tx + _logistic_draw(rng, 0.0, s)
        fy = ty + _logistic_draw(rng, 0.0, s)
        forecasts.append(frame.unproject(fx, fy))
    return StormCellObservation(
        id=cell.cell_id, pixels=cell.pixels, center=(lon_c, lat_c),
        radius=round(math.sqrt(w * h) / 2.0, 3), west=lon_w, east=lon_e,
        south=lat_s, north=lat_n, heading=cell.compass_heading(),
        speed=cell.speed(), center_forecasts=tuple(forecasts))


def write_archive(truth: ScenarioTruth, frame: PlanarFrame, directory,
                  archive_marks, rng: np.random.Generator,
                  err_scale: float = 2.0, n_horizons: int = 4):
    """One nowcast file per archive mark; returns the written paths."""
    paths = []
    for mark in archive_marks:
        obs = [
            _observation(truth, cell, mark, frame, rng, err_scale, n_horizons)
            for cell in truth.cells]
        nowcast = NowcastFile(
            issue_time=BASE_TIME + timedelta(minutes=mark), cells=tuple(obs))
        paths.append(serialize_nowcast(nowcast, directory))
    return paths


def observed_cells(truth: ScenarioTruth, marks) -> ObservedCells:
    boxes = []
    for mark in marks:
        boxes.append(np.array([truth.box_at(c, mark) for c in truth.cells]))
    return ObservedCells(times_minutes=tuple(float(m) for m in marks),
                         boxes=tuple(boxes))


def _cluster_cells(rng: np.random.Generator, center, n: int, first_id: int,
                   velocity, spread: float = 45.0):
    """A loose group of cells around `center` sharing a drift direction."""
    cells = []
    pixel_pool = [110, 130, 1500, 1700]  # two octaves, so growth buckets exist
    for i in range(n):
        cells.append(ScriptedCell(
            cell_id=first_id + i,
            x0=center[0] + rng.uniform(-spread, spread),
            y0=center[1] + rng.uniform(-spread, spread),
            vx=velocity[0] + rng.uniform(-3.0, 3.0),
            vy=velocity[1] + rng.uniform(-3.0, 3.0),
            width0=rng.uniform(25.0, 40.0),
            height0=rng.uniform(25.0, 40.0),
            pixels=int(pixel_pool[i % len(pixel_pool)] + rng.integers(0, 20)),
        ))
    return cells


GRID_COMMON = {
    "x_min": -650.0, "x_max": 100.0, "n_x": 33,
    "y_min": -550.0, "y_max": 200.0, "n_y": 28,
    "n_lambda": 32, "dt_minutes": 2.0,
}
AIRCRAFT_COMMON = {
    "airspeed_kmh": 792.0, "turn_rate_rad_min": 0.3,
    "wind_u_kmh": 9.36, "wind_v_kmh": 20.16,
    "var_x_km2": 0.25, "var_y_km2": 0.25, "var_lambda_rad2": 4.0e-5,
}


def _write_config(path: Path, seed: int, nowcast_name: str, n_steps: int,
                  start, goal, clusters, n_samples: int, storm_horizons: int,
                  fit_horizons, n_rollouts: int):
    config = {
        "seed": seed,
        "paths": {
            "archive_dir": "archive",
            "nowcast": f"archive/{nowcast_name}",
            "observed": "observed_cells.csv",
            "models": "out/models.ini",
            "out_dir": "out",
        },
        "frame": {"center_lat": IBERIA_FRAME.center_lat,
                  "center_lon": IBERIA_FRAME.center_lon},
        "grid": dict(GRID_COMMON, n_steps=n_steps),
        "aircraft": dict(AIRCRAFT_COMMON),
        "storm": {"clusters": clusters, "n_samples": n_samples,
                  "horizons": storm_horizons},
        "fit": {"horizons": list(fit_horizons), "min_samples": 8},
        "problem": {"start": list(start), "goal": list(goal)},
        "rollout": {"n": n_rollouts, "scoring": "observed"},
        "report": {"figures": True, "pgm": False},
    }
    path.write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    return path


@dataclass(frozen=True)
class Scenario:
    root: Path
    archive_dir: Path
    nowcast: Path
    observed_path: Path
    configs: tuple  # one or more YAML paths
    truth: ScenarioTruth
    frame: PlanarFrame
    start: tuple
    goal: tuple


# Route geometry shared by the case-study analogs.
GAP_START = (-365.0, 100.0, -1.92)
GAP_GOAL = (-500.0, -460.0, -240.0, -200.0)
FAR_START = (-13.0, 107.0, -2.53)


def generate_gap_scenario(out_dir, seed: int, n_rollouts: int = 10_000,
                          clusters: int = 12, n_samples: int = 100) -> Scenario:
    """Two storm clusters flanking the direct route, with a flyable gap between.

    The direct path runs from GAP_START to the goal box; the clusters sit
    roughly 120 km to either side of its midpoint and drift slowly northeast,
    so an aircraft threading the gap stays clear throughout the horizon.
    """
    rng = np.random.default_rng(seed)
    frame = IBERIA_FRAME
    cells = (_cluster_cells(rng, (-310.0, -101.0), 10, first_id=1,
                            velocity=(18.0, 18.0))
             + _cluster_cells(rng, (-535.0, -19.0), 10, first_id=11,
                              velocity=(22.0, 14.0)))
    truth = build_truth(cells, first_mark=-80, last_mark=60, rng=rng)
    root = Path(out_dir)
    archive_dir = root / "archive"
    paths = write_archive(truth, frame, archive_dir,
                          archive_marks=range(-80, 10, 10), rng=rng,
                          err_scale=2.0, n_horizons=4)
    observed = observed_cells(truth, marks=range(0, 70, 10))
    observed_path = root / "observed_cells.csv"
    from .artifacts import write_observed_csv
    write_observed_csv(observed, observed_path)
    config = _write_config(
        root / "config.yaml", seed=seed, nowcast_name=paths[-1].name,
        n_steps=20, start=GAP_START, goal=GAP_GOAL, clusters=clusters,
        n_samples=n_samples, storm_horizons=4, fit_horizons=(1, 2, 3, 4),
        n_rollouts=n_rollouts)
    return Scenario(root=root, archive_dir=archive_dir, nowcast=paths[-1],
                    observed_path=observed_path, configs=(config,),
                    truth=truth, frame=frame, start=GAP_START, goal=GAP_GOAL)


def generate_far_start_scenario(out_dir, seed: int,
                                n_rollouts: int = 2_000) -> Scenario:
    """Start beyond the 40-minute reachable range; 60 minutes make it feasible.

    A small off-route cluster keeps the storm pipeline engaged without
    blocking the direct path. Two configs are written, identical except for
    the horizon (20 vs 30 steps of 2 minutes).
    """
    rng = np.random.default_rng(seed)
    frame = IBERIA_FRAME
    cells = _cluster_cells(rng, (-200.0, 160.0), 12, first_id=1,
                           velocity=(15.0, 10.0), spread=35.0)
    truth = build_truth(cells, first_mark=-100, last_mark=60, rng=rng)
    root = Path(out_dir)
    archive_dir = root / "archive"
    paths = write_archive(truth, frame, archive_dir,
                          archive_marks=range(-100, 10, 10), rng=rng,
                          err_scale=2.0, n_horizons=6)
    observed = observed_cells(truth, marks=range(0, 70, 10))
    observed_path = root / "observed_cells.csv"
    from .artifacts import write_observed_csv
    write_observed_csv(observed, observed_path)
    configs = []
    for label, steps in (("40min", 20), ("60min", 30)):
        configs.append(_write_config(
            root / f"config_{label}.yaml", seed=seed,
            nowcast_name=paths[-1].name, n_steps=steps, start=FAR_START,
            goal=GAP_GOAL, clusters=6, n_samples=60, storm_horizons=6,
            fit_horizons=(1, 2, 3, 4, 5, 6), n_rollouts=n_rollouts))
    return Scenario(root=root, archive_dir=archive_dir, nowcast=paths[-1],
                    observed_path=observed_path, configs=tuple(configs),
                    truth=truth, frame=frame, start=FAR_START, goal=GAP_GOAL)
