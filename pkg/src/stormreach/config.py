"""Run configuration: one YAML file drives the whole pipeline."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import DataError
from .grid import GridSpec
from .kernel import AircraftParams
from .projection import PlanarFrame


@dataclass(frozen=True)
class RunConfig:
    seed: int
    archive_dir: Path
    nowcast: Path
    observed: Path | None
    models_file: Path
    out_dir: Path
    frame: PlanarFrame
    grid: GridSpec
    aircraft: AircraftParams
    clusters: object  # int or "auto"
    n_samples: int
    storm_horizons: int
    heading_weight: float | None
    fit_horizons: tuple
    fit_window: int | None
    fit_min_samples: int
    start: tuple  # (x, y, lambda)
    goal: tuple  # (x_lo, x_hi, y_lo, y_hi)
    n_rollouts: int
    scoring: str
    figures: bool
    pgm: bool
    threads: int = 1


def _get(section: dict, key: str, default=None, required: bool = False):
    if key in section:
        return section[key]
    if required:
        raise DataError(f"config is missing required key {key!r}")
    return default


def load_config(path, seed: int | None = None, out_dir=None,
                threads: int | None = None) -> RunConfig:
    """Parse and validate a YAML run configuration.

    Relative paths resolve against the config file's directory; `seed`,
    `out_dir`, and `threads` override the file when given.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise DataError(f"config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError(f"config file {path} must hold a mapping")
    base = path.parent

    def resolve(p):
        return (base / p).resolve() if p is not None else None

    if seed is None:
        seed = _get(raw, "seed", required=True)
    if not isinstance(seed, int):
        raise DataError("seed must be an integer (reproducibility is mandatory)")
    paths = raw.get("paths", {})
    out = Path(out_dir).resolve() if out_dir is not None else \
        resolve(_get(paths, "out_dir", "out"))
    frame_sec = raw.get("frame", {})
    grid_sec = raw.get("grid", {})
    air_sec = raw.get("aircraft", {})
    storm_sec = raw.get("storm", {})
    fit_sec = raw.get("fit", {})
    prob_sec = raw.get("problem", {})
    roll_sec = raw.get("rollout", {})
    rep_sec = raw.get("report", {})
    try:
        frame = PlanarFrame(center_lat=float(_get(frame_sec, "center_lat", 38.0)),
                            center_lon=float(_get(frame_sec, "center_lon", -98.0)))
        grid = GridSpec(
            x_min=float(_get(grid_sec, "x_min", required=True)),
            x_max=float(_get(grid_sec, "x_max", required=True)),
            n_x=int(_get(grid_sec, "n_x", required=True)),
            y_min=float(_get(grid_sec, "y_min", required=True)),
            y_max=float(_get(grid_sec, "y_max", required=True)),
            n_y=int(_get(grid_sec, "n_y", required=True)),
            n_lambda=int(_get(grid_sec, "n_lambda", required=True)),
            dt_minutes=float(_get(grid_sec, "dt_minutes", 2.0)),
            n_steps=int(_get(grid_sec, "n_steps", required=True)),
        )
        aircraft = AircraftParams(
            airspeed=float(_get(air_sec, "airspeed_kmh", 792.0)),
            turn_rate=float(_get(air_sec, "turn_rate_rad_min", 0.3)),
            wind_u=float(_get(air_sec, "wind_u_kmh", 9.36)),
            wind_v=float(_get(air_sec, "wind_v_kmh", 20.16)),
            var_x=float(_get(air_sec, "var_x_km2", 0.25)),
            var_y=float(_get(air_sec, "var_y_km2", 0.25)),
            var_lambda=float(_get(air_sec, "var_lambda_rad2", 4.0e-5)),
        )
        start = tuple(float(v) for v in _get(prob_sec, "start", required=True))
        goal = tuple(float(v) for v in _get(prob_sec, "goal", required=True))
        if len(start) != 3 or len(goal) != 4:
            raise ValueError("problem.start needs 3 values, problem.goal needs 4")
        clusters = _get(storm_sec, "clusters", "auto")
        if clusters != "auto":
            clusters = int(clusters)
        config = RunConfig(
            seed=seed,
            archive_dir=resolve(_get(paths, "archive_dir", "archive")),
            nowcast=resolve(_get(paths, "nowcast", required=True)),
            observed=resolve(_get(paths, "observed")),
            models_file=resolve(_get(paths, "models", "out/models.ini")),
            out_dir=out,
            frame=frame,
            grid=grid,
            aircraft=aircraft,
            clusters=clusters,
            n_samples=int(_get(storm_sec, "n_samples", 100)),
            storm_horizons=int(_get(storm_sec, "horizons", 4)),
            heading_weight=_get(storm_sec, "heading_weight"),
            fit_horizons=tuple(int(t) for t in _get(fit_sec, "horizons", [1, 2, 3, 4])),
            fit_window=_get(fit_sec, "window"),
            fit_min_samples=int(_get(fit_sec, "min_samples", 8)),
            start=start,
            goal=goal,
            n_rollouts=int(_get(roll_sec, "n", 10_000)),
            scoring=str(_get(roll_sec, "scoring", "observed")),
            figures=bool(_get(rep_sec, "figures", True)),
            pgm=bool(_get(rep_sec, "pgm", False)),
            threads=threads if threads is not None else int(_get(raw, "threads", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise DataError(f"config file {path} is invalid: {exc}") from exc
    if config.threads < 1:
        raise DataError("threads must be >= 1")
    if config.scoring not in ("observed", "field"):
        raise DataError(f"rollout.scoring must be 'observed' or 'field', "
                        f"not {config.scoring!r}")
    return config
