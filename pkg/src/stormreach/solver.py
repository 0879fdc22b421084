"""Backward reach-avoid dynamic program over the discretized state space.

The value V_t(s) is the maximum probability of entering the goal box within
the remaining steps while staying clear of storms until entry. Recursion:
V_N = 1 on the goal, and V_t = 1_G + p_safe_t * max_u E[V_{t+1}] with
p_safe_t = clamp(1_{not G} - p_storm_t, 0, 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec
from .kernel import CONTROL_CODES, TransitionKernel
from .stormfield import StormField, interpolate_field


@dataclass(frozen=True)
class ReachAvoidProblem:
    """Goal box (x_lo, x_hi, y_lo, y_hi) over all headings, plus storm fields."""

    grid: GridSpec
    goal: tuple[float, float, float, float]
    field: StormField | None = None  # None -> storm-free airspace

    def __post_init__(self):
        x_lo, x_hi, y_lo, y_hi = self.goal
        if x_lo >= x_hi or y_lo >= y_hi:
            raise ValueError("goal box must have positive extent")
        if not self.grid.goal_mask(self.goal).any():
            raise ValueError("goal box covers no grid cell center")
        if self.field is not None and self.field.values.shape[1:] != \
                (self.grid.n_x, self.grid.n_y):
            raise ValueError("storm field grid does not match the planner grid")

    def storm_probability(self, t_step: int) -> np.ndarray:
        if self.field is None:
            return np.zeros((self.grid.n_x, self.grid.n_y))
        return interpolate_field(self.field, t_step * self.grid.dt_minutes)


@dataclass(frozen=True)
class Solution:
    """Value function and argmax policy per step; policy entries are control codes."""

    grid: GridSpec
    value: np.ndarray  # (n_steps + 1, n_x, n_y, n_lambda) in [0, 1]
    policy: np.ndarray  # (n_steps, n_x, n_y, n_lambda) in {-1, 0, +1}

    def value_at(self, s, t_step: int = 0) -> float:
        """Nearest-cell lookup of V_t at a continuous state; 0 outside the grid."""
        x, y, lam = s
        idx = self.grid.state_index(x, y, lam)
        if idx == self.grid.lost_index:
            return 0.0
        ix, iy, il = self.grid.unflat(idx)
        return float(self.value[t_step, ix, iy, il])

    def control_at(self, s, t_step: int) -> int:
        x, y, lam = s
        idx = self.grid.state_index(x, y, lam)
        if idx == self.grid.lost_index:
            return 0
        ix, iy, il = self.grid.unflat(idx)
        return int(self.policy[t_step, ix, iy, il])


def solve(problem: ReachAvoidProblem, kernel: TransitionKernel) -> Solution:
    """Run the backward recursion; ties prefer straight flight, then +turn."""
    grid = problem.grid
    if kernel.grid != grid:
        raise ValueError("kernel was built on a different grid")
    n = grid.n_steps
    goal3 = np.broadcast_to(grid.goal_mask(problem.goal)[:, :, None],
                            (grid.n_x, grid.n_y, grid.n_lambda)).astype(float)
    value = np.empty((n + 1, grid.n_x, grid.n_y, grid.n_lambda))
    policy = np.zeros((n, grid.n_x, grid.n_y, grid.n_lambda), dtype=np.int8)
    value[n] = goal3
    # Control sweep order implements the tie-break: straight wins ties, then +turn.
    sweep = [(1, 0), (2, 1), (0, -1)]  # (control index, code)
    for t in range(n - 1, -1, -1):
        p_storm = problem.storm_probability(t)
        p_safe = np.clip((1.0 - goal3[:, :, 0]) - p_storm, 0.0, 1.0)
        best = None
        codes = np.zeros((grid.n_x, grid.n_y, grid.n_lambda), dtype=np.int8)
        for u_idx, code in sweep:
            expect = kernel.expected_value(value[t + 1], u_idx)
            if best is None:
                best = expect
                codes[:] = code
            else:
                better = expect > best
                best = np.where(better, expect, best)
                codes[better] = code
        value[t] = np.clip(goal3 + p_safe[:, :, None] * best, 0.0, 1.0)
        policy[t] = codes
    return Solution(grid=grid, value=value, policy=policy)


def evaluate(solution: Solution, s, t_step: int = 0) -> float:
    """Reach-avoid probability at a continuous state (nearest-cell lookup)."""
    return solution.value_at(s, t_step)


def control_from_code(code: int, turn_rate: float) -> float:
    if code not in CONTROL_CODES:
        raise ValueError(f"unknown control code {code}")
    return code * turn_rate
