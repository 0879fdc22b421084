"""Writers and readers for every file the pipeline emits.

All delimited outputs use fixed float formatting so reruns with the same seed
are byte-identical. Each writer has a matching reader used by the tests and
by downstream pipeline stages.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError
from .grid import GridSpec
from .rollout import OUTCOME_NAMES, ObservedCells, RolloutReport
from .solver import Solution
from .stormfield import StormField

FLOAT_FMT = "%.10g"


def _require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise DataError(f"required file is missing: {path}")
    return path


# -- storm fields -------------------------------------------------------------

def write_field_csvs(field: StormField, directory) -> list[Path]:
    """One CSV per horizon, rows = y index, columns = x index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for tau in range(field.values.shape[0]):
        path = directory / f"field_tau{tau}.csv"
        np.savetxt(path, field.values[tau].T, fmt=FLOAT_FMT, delimiter=",")
        paths.append(path)
    return paths


def read_field_csv(path) -> np.ndarray:
    """Field values back in [ix, iy] orientation."""
    return np.atleast_2d(np.loadtxt(_require(path), delimiter=",")).T


def write_field_pgms(field: StormField, directory) -> list[Path]:
    """Optional portable graymap per horizon; 255 = probability 1."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for tau in range(field.values.shape[0]):
        gray = np.round(field.values[tau].T[::-1] * 255).astype(int)  # north up
        lines = ["P2", f"{gray.shape[1]} {gray.shape[0]}", "255"]
        lines += [" ".join(str(v) for v in row) for row in gray]
        path = directory / f"field_tau{tau}.pgm"
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
        paths.append(path)
    return paths


def read_pgm(path) -> np.ndarray:
    tokens = _require(path).read_text(encoding="ascii").split()
    if tokens[0] != "P2":
        raise DataError(f"{path}: not an ASCII PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4:4 + w * h]]).reshape(h, w)
    if maxval != 255:
        raise DataError(f"{path}: unexpected maxval {maxval}")
    return data


# -- value function and policy ------------------------------------------------

def write_value_csvs(solution: Solution, directory) -> list[Path]:
    """One CSV per time step per heading slice, rows = y index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(solution.value.shape[0]):
        for il in range(solution.grid.n_lambda):
            path = directory / f"value_t{t:02d}_lam{il:02d}.csv"
            np.savetxt(path, solution.value[t, :, :, il].T, fmt=FLOAT_FMT,
                       delimiter=",")
            paths.append(path)
    return paths


def read_value_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(_require(path), delimiter=",")).T


def write_policy_csv(solution: Solution, path) -> Path:
    """Single long-format CSV of control codes for every (t, cell)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = solution.grid
    n_t = solution.policy.shape[0]
    ix, iy, il = g.unflat(np.arange(g.n_states))
    with path.open("w", encoding="utf-8") as fh:
        fh.write("t,ix,iy,ilam,code\n")
        for t in range(n_t):
            flat = solution.policy[t].reshape(-1)
            for a, b, c, code in zip(ix, iy, il, flat):
                fh.write(f"{t},{a},{b},{c},{code}\n")
    return path


def read_policy_csv(path, grid: GridSpec) -> np.ndarray:
    data = np.loadtxt(_require(path), delimiter=",", skiprows=1, dtype=int)
    n_t = int(data[:, 0].max()) + 1
    policy = np.zeros((n_t, grid.n_x, grid.n_y, grid.n_lambda), dtype=np.int8)
    policy[data[:, 0], data[:, 1], data[:, 2], data[:, 3]] = data[:, 4]
    if data.shape[0] != n_t * grid.n_states:
        raise DataError(f"{path}: expected {n_t * grid.n_states} policy rows, "
                        f"got {data.shape[0]}")
    return policy


# -- rollouts -----------------------------------------------------------------

def write_trajectories_csv(trajectories, controls, outcomes, grid: GridSpec,
                           path) -> Path:
    """One row per (rollout, step): t, x, y, lambda, control code, outcome."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, steps, _ = trajectories.shape
    with path.open("w", encoding="utf-8") as fh:
        fh.write("rollout,step,t_minutes,x,y,lam,u_code,outcome\n")
        for i in range(n):
            name = OUTCOME_NAMES[int(outcomes[i])]
            for t in range(steps):
                u = int(controls[i, t]) if t < steps - 1 else 0
                x, y, lam = trajectories[i, t]
                fh.write(f"{i},{t},{FLOAT_FMT % (t * grid.dt_minutes)},"
                         f"{FLOAT_FMT % x},{FLOAT_FMT % y},{FLOAT_FMT % lam},"
                         f"{u},{name}\n")
    return path


def read_trajectories_csv(path):
    """Returns (trajectories (n, steps, 3), controls (n, steps-1), outcome names (n,))."""
    lines = _require(path).read_text(encoding="utf-8").splitlines()
    rows = [line.split(",") for line in lines[1:]]
    n = int(rows[-1][0]) + 1
    steps = int(rows[-1][1]) + 1
    trajs = np.empty((n, steps, 3))
    controls = np.zeros((n, steps - 1), dtype=int)
    outcomes = [""] * n
    for r in rows:
        i, t = int(r[0]), int(r[1])
        trajs[i, t] = (float(r[3]), float(r[4]), float(r[5]))
        if t < steps - 1:
            controls[i, t] = int(r[6])
        outcomes[i] = r[7]
    return trajs, controls, np.array(outcomes)


def write_envelope_csv(report: RolloutReport, grid: GridSpec, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("step,t_minutes,mean_x,mean_y,sigma_x,sigma_y\n")
        for t in range(report.mean_path.shape[0]):
            fh.write(f"{t},{FLOAT_FMT % (t * grid.dt_minutes)},"
                     f"{FLOAT_FMT % report.mean_path[t, 0]},"
                     f"{FLOAT_FMT % report.mean_path[t, 1]},"
                     f"{FLOAT_FMT % report.sigma_path[t, 0]},"
                     f"{FLOAT_FMT % report.sigma_path[t, 1]}\n")
    return path


def read_envelope_csv(path):
    data = np.loadtxt(_require(path), delimiter=",", skiprows=1)
    return data[:, 2:4], data[:, 4:6]


# -- observed cells -----------------------------------------------------------

def write_observed_csv(observed: ObservedCells, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("minutes,west,east,south,north\n")
        for minutes, boxes in zip(observed.times_minutes, observed.boxes):
            for west, east, south, north in boxes:
                fh.write(f"{FLOAT_FMT % minutes},{FLOAT_FMT % west},"
                         f"{FLOAT_FMT % east},{FLOAT_FMT % south},"
                         f"{FLOAT_FMT % north}\n")
    return path


def read_observed_csv(path) -> ObservedCells:
    data = np.loadtxt(_require(path), delimiter=",", skiprows=1, ndmin=2)
    times = sorted(set(data[:, 0]))
    boxes = tuple(data[data[:, 0] == t, 1:5] for t in times)
    return ObservedCells(times_minutes=tuple(times), boxes=boxes)


# -- structured text summaries ------------------------------------------------

def write_summary(entries: dict, path) -> Path:
    """key = value lines; values are formatted deterministically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for key, value in entries.items():
        if isinstance(value, float):
            value = FLOAT_FMT % value
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_summary(path) -> dict:
    entries = {}
    for line in _require(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" = ")
        entries[key] = value
    return entries


def report_entries(report: RolloutReport) -> dict:
    entries = {"n_rollouts": report.n_rollouts}
    entries.update({f"n_{k.replace('-', '_')}": v for k, v in report.counts().items()})
    entries["success_fraction"] = report.success_fraction
    entries["mean_flight_time_s"] = report.mean_flight_time_s
    return entries
