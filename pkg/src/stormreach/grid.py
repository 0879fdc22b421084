"""Discretization of the planar-position x heading state space."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Regular grid over [x_min, x_max] x [y_min, y_max] x [-pi, pi).

    Position cells are half-open intervals with centers offset by half a
    spacing; heading cells are centered on -pi + i * dlam so that heading 0 is
    a grid point for even cell counts. The heading dimension wraps.
    """

    x_min: float
    x_max: float
    n_x: int
    y_min: float
    y_max: float
    n_y: int
    n_lambda: int
    dt_minutes: float
    n_steps: int

    def __post_init__(self):
        if self.n_x < 2 or self.n_y < 2 or self.n_lambda < 2:
            raise ValueError("every grid dimension needs at least 2 cells")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("grid extents must be increasing")
        if self.dt_minutes <= 0 or self.n_steps < 1:
            raise ValueError("time discretization must be positive")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.n_y

    @property
    def dlam(self) -> float:
        return 2.0 * math.pi / self.n_lambda

    @property
    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.n_y) + 0.5) * self.dy

    @property
    def lambda_centers(self) -> np.ndarray:
        return -math.pi + np.arange(self.n_lambda) * self.dlam

    @property
    def n_states(self) -> int:
        return self.n_x * self.n_y * self.n_lambda

    @property
    def lost_index(self) -> int:
        """Absorbing out-of-domain state appended after the regular cells."""
        return self.n_states

    def horizon_minutes(self) -> float:
        return self.dt_minutes * self.n_steps

    def contains(self, x, y):
        return ((np.asarray(x) >= self.x_min) & (np.asarray(x) <= self.x_max)
                & (np.asarray(y) >= self.y_min) & (np.asarray(y) <= self.y_max))

    def position_cell(self, x, y):
        """(ix, iy) of the cells containing planar points; caller checks contains()."""
        ix = np.clip(((np.asarray(x) - self.x_min) / self.dx).astype(int), 0, self.n_x - 1)
        iy = np.clip(((np.asarray(y) - self.y_min) / self.dy).astype(int), 0, self.n_y - 1)
        return ix, iy

    def heading_cell(self, lam):
        """Nearest heading cell, periodic."""
        return np.round((np.asarray(lam) + math.pi) / self.dlam).astype(int) % self.n_lambda

    def state_index(self, x: float, y: float, lam: float) -> int:
        """Flat index of the cell containing a continuous state; lost if outside."""
        if not bool(self.contains(x, y)):
            return self.lost_index
        ix, iy = self.position_cell(x, y)
        il = self.heading_cell(lam)
        return (int(ix) * self.n_y + int(iy)) * self.n_lambda + int(il)

    def flat(self, ix, iy, il):
        return (np.asarray(ix) * self.n_y + np.asarray(iy)) * self.n_lambda + np.asarray(il)

    def unflat(self, index):
        index = np.asarray(index)
        il = index % self.n_lambda
        rest = index // self.n_lambda
        return rest // self.n_y, rest % self.n_y, il

    def cell_center(self, index: int):
        ix, iy, il = self.unflat(index)
        return (float(self.x_centers[ix]), float(self.y_centers[iy]),
                float(self.lambda_centers[il]))

    def goal_mask(self, box) -> np.ndarray:
        """(n_x, n_y) mask of cells whose centers fall in (x_lo, x_hi, y_lo, y_hi)."""
        x_lo, x_hi, y_lo, y_hi = box
        in_x = (self.x_centers >= x_lo) & (self.x_centers <= x_hi)
        in_y = (self.y_centers >= y_lo) & (self.y_centers <= y_hi)
        return in_x[:, None] & in_y[None, :]

    def half_diagonal(self) -> float:
        return 0.5 * math.hypot(self.x_max - self.x_min, self.y_max - self.y_min)
