"""Closed-loop Monte Carlo rollouts under a solved policy.

Rollouts propagate the continuous dynamics with Gaussian noise (or, for
oracle checks, the discretized chain itself) and score safety either against
observed storm-cell boxes or against the probabilistic storm field.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec
from .kernel import AircraftParams, TransitionKernel
from .stormfield import StormField, interpolate_field

OUTCOME_PENDING = 0
OUTCOME_REACHED = 1
OUTCOME_STORM_HIT = 2
OUTCOME_LOST = 3
OUTCOME_TIMED_OUT = 4
OUTCOME_NAMES = {OUTCOME_REACHED: "reached", OUTCOME_STORM_HIT: "storm-hit",
                 OUTCOME_LOST: "lost", OUTCOME_TIMED_OUT: "timed-out"}


@dataclass(frozen=True)
class ObservedCells:
    """Storm-cell boxes observed at fixed times; active set is a step function."""

    times_minutes: tuple  # ascending
    boxes: tuple  # one (m_i, 4) array (west, east, south, north) per time

    def active_at(self, t_minutes: float) -> np.ndarray:
        idx = -1
        for i, ts in enumerate(self.times_minutes):
            if ts <= t_minutes + 1e-9:
                idx = i
        if idx < 0:
            return np.empty((0, 4))
        return self.boxes[idx]


@dataclass(frozen=True)
class RolloutReport:
    n_rollouts: int
    n_reached: int
    n_storm_hit: int
    n_lost: int
    n_timed_out: int
    mean_flight_time_s: float  # nan when nothing reached the goal
    mean_path: np.ndarray  # (n_steps + 1, 2)
    sigma_path: np.ndarray  # (n_steps + 1, 2), per-step std of x and y
    entry_steps: np.ndarray = None  # (n,), step of goal entry, -1 if never

    @property
    def success_fraction(self) -> float:
        return self.n_reached / self.n_rollouts

    def counts(self):
        return {"reached": self.n_reached, "storm-hit": self.n_storm_hit,
                "lost": self.n_lost, "timed-out": self.n_timed_out}


def _in_goal(xy: np.ndarray, goal) -> np.ndarray:
    x_lo, x_hi, y_lo, y_hi = goal
    return ((xy[:, 0] >= x_lo) & (xy[:, 0] <= x_hi)
            & (xy[:, 1] >= y_lo) & (xy[:, 1] <= y_hi))


def _in_any_box(xy: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    hit = np.zeros(xy.shape[0], dtype=bool)
    for west, east, south, north in boxes:
        hit |= ((xy[:, 0] >= west) & (xy[:, 0] <= east)
                & (xy[:, 1] >= south) & (xy[:, 1] <= north))
    return hit


def envelope(trajectories: np.ndarray):
    """Per-step mean and standard deviation of (x, y) across rollouts."""
    trajectories = np.asarray(trajectories)
    if trajectories.ndim != 3:
        raise ValueError("expected (n, steps, >=2) trajectory array")
    if trajectories.shape[0] < 2:
        warnings.warn("envelope of a single trajectory has zero width")
    mean = trajectories[:, :, :2].mean(axis=0)
    sigma = trajectories[:, :, :2].std(axis=0)
    return mean, sigma


def rollout(policy: np.ndarray, grid: GridSpec, params: AircraftParams, s0,
            n: int, rng: np.random.Generator,
            observed: ObservedCells | None = None, goal=None,
            scoring: str = "observed", field: StormField | None = None,
            dynamics: str = "continuous"):
    """Run n seeded closed-loop rollouts; returns (report, trajectories, controls, outcomes).

    `policy` holds control codes per (step, cell), as produced by the solver.
    scoring="observed" flags a rollout as storm-hit when its position enters
    any observed box active at that time; scoring="field" draws a Bernoulli
    survival against the probabilistic field (nearest grid cell), matching the
    quantity the dynamic program computes. dynamics="kernel" replaces the
    continuous propagation with the discretized transition chain for
    self-consistency checks against the solver.
    """
    if policy.shape != (grid.n_steps, grid.n_x, grid.n_y, grid.n_lambda):
        raise ValueError("policy shape does not match the grid")
    if scoring not in ("observed", "field"):
        raise ValueError(f"unknown scoring {scoring!r}")
    if scoring == "observed" and observed is None:
        observed = ObservedCells(times_minutes=(), boxes=())
    if scoring == "field" and field is None:
        raise ValueError("field scoring needs a storm field")
    if dynamics not in ("continuous", "kernel"):
        raise ValueError(f"unknown dynamics {dynamics!r}")
    x0, y0, lam0 = s0
    if grid.state_index(x0, y0, lam0) == grid.lost_index:
        raise ValueError(f"start state {s0} lies outside the grid")
    if goal is None:
        raise ValueError("goal box required")

    n_steps = grid.n_steps
    dt_h = grid.dt_minutes / 60.0
    sx, sy, sl = params.sigmas()
    kernel = TransitionKernel(grid, params) if dynamics == "kernel" else None

    states = np.tile(np.array([x0, y0, (lam0 + math.pi) % (2 * math.pi) - math.pi]),
                     (n, 1))
    if dynamics == "kernel":
        # Snap to the start cell so the chain matches the DP exactly.
        ix0, iy0 = grid.position_cell(x0, y0)
        il0 = grid.heading_cell(lam0)
        cell_ix = np.full(n, int(ix0))
        cell_iy = np.full(n, int(iy0))
        cell_il = np.full(n, int(il0))
        states[:, 0] = grid.x_centers[cell_ix]
        states[:, 1] = grid.y_centers[cell_iy]
        states[:, 2] = grid.lambda_centers[cell_il]
    outcome = np.full(n, OUTCOME_PENDING, dtype=np.int8)
    entry_step = np.full(n, -1, dtype=int)
    trajectories = np.empty((n, n_steps + 1, 3))
    controls = np.zeros((n, n_steps), dtype=np.int8)

    for t in range(n_steps + 1):
        trajectories[:, t, :] = states
        pending = outcome == OUTCOME_PENDING
        # Goal entry is checked before safety: reaching at step t only needs
        # safety through step t-1.
        reached_now = pending & _in_goal(states[:, :2], goal)
        outcome[reached_now] = OUTCOME_REACHED
        entry_step[reached_now] = t
        pending = outcome == OUTCOME_PENDING
        t_minutes = t * grid.dt_minutes
        if scoring == "observed":
            boxes = observed.active_at(t_minutes)
            hit = pending & _in_any_box(states[:, :2], boxes)
        else:
            p_grid = interpolate_field(field, t_minutes)
            ix, iy = grid.position_cell(states[:, 0], states[:, 1])
            p_here = p_grid[ix, iy]
            hit = pending & (rng.uniform(size=n) < p_here)
        outcome[hit] = OUTCOME_STORM_HIT
        pending = outcome == OUTCOME_PENDING
        if t == n_steps:
            outcome[pending] = OUTCOME_TIMED_OUT
            break

        codes = np.zeros(n, dtype=np.int8)
        if dynamics == "kernel":
            flat_codes = policy[t, cell_ix, cell_iy, cell_il]
            codes[pending] = flat_codes[pending]
            controls[:, t] = np.where(pending, codes, 0)
            u_idx = (codes + 1).astype(int)  # -1,0,1 -> 0,1,2
            nx, ny, nl, lost = kernel.sample_successors(
                cell_ix, cell_iy, cell_il, u_idx, rng)
            cell_ix = np.where(pending, nx, cell_ix)
            cell_iy = np.where(pending, ny, cell_iy)
            cell_il = np.where(pending, nl, cell_il)
            newly_lost = pending & lost
            outcome[newly_lost] = OUTCOME_LOST
            still = outcome == OUTCOME_PENDING
            states[still, 0] = grid.x_centers[cell_ix[still]]
            states[still, 1] = grid.y_centers[cell_iy[still]]
            states[still, 2] = grid.lambda_centers[cell_il[still]]
        else:
            ix, iy = grid.position_cell(states[:, 0], states[:, 1])
            il = grid.heading_cell(states[:, 2])
            codes[pending] = policy[t, ix, iy, il][pending]
            controls[:, t] = np.where(pending, codes, 0)
            noise = rng.normal(size=(n, 3)) * np.array([sx, sy, sl])
            lam = states[:, 2]
            new = np.empty_like(states)
            new[:, 0] = states[:, 0] + dt_h * (params.airspeed * np.cos(lam)
                                               + params.wind_u) + noise[:, 0]
            new[:, 1] = states[:, 1] + dt_h * (params.airspeed * np.sin(lam)
                                               + params.wind_v) + noise[:, 1]
            new[:, 2] = ((lam + grid.dt_minutes * codes * params.turn_rate
                          + noise[:, 2] + math.pi) % (2 * math.pi) - math.pi)
            states = np.where(pending[:, None], new, states)
            off = pending & ~np.asarray(grid.contains(states[:, 0], states[:, 1]))
            outcome[off] = OUTCOME_LOST
            states[off, 0] = states[off, 0].clip(grid.x_min, grid.x_max)
            states[off, 1] = states[off, 1].clip(grid.y_min, grid.y_max)

    mean, sigma = envelope(trajectories)
    reached = outcome == OUTCOME_REACHED
    flight_time = float(np.mean(entry_step[reached]) * grid.dt_minutes * 60.0) \
        if reached.any() else math.nan
    report = RolloutReport(
        n_rollouts=n,
        n_reached=int(reached.sum()),
        n_storm_hit=int((outcome == OUTCOME_STORM_HIT).sum()),
        n_lost=int((outcome == OUTCOME_LOST).sum()),
        n_timed_out=int((outcome == OUTCOME_TIMED_OUT).sum()),
        mean_flight_time_s=flight_time,
        mean_path=mean,
        sigma_path=sigma,
        entry_steps=entry_step,
    )
    return report, trajectories, controls, outcome
