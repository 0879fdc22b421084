"""Discretized transition probabilities for the unicycle aircraft model.

One step of the dynamics moves the aircraft by dt * (v * cos/sin(heading) +
wind) in position and dt * u in heading, plus zero-mean Gaussian noise. On the
grid this becomes, per (heading cell, control), independent successor
distributions over x-offsets, y-offsets, and heading cells: Gaussian density
at successor cell centers times cell volume, truncated at 4 sigma plus one
cell, then renormalized. Position mass leaving the domain is routed to an
absorbing "lost" state.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridSpec

VARIANCE_FLOOR = 1e-12
CONTROL_CODES = (-1, 0, 1)  # yaw rate = code * turn_rate


@dataclass(frozen=True)
class AircraftParams:
    """Aircraft motion parameters; defaults model a jet at cruise.

    Wind components are km/h (zonal w_u: West-to-East, meridional w_v:
    South-to-North). Noise variances are km^2, km^2, rad^2 per step.
    """

    airspeed: float = 792.0  # km/h
    turn_rate: float = 0.3  # rad/min; control set {-turn_rate, 0, +turn_rate}
    wind_u: float = 9.36  # km/h
    wind_v: float = 20.16  # km/h
    var_x: float = 0.25  # km^2
    var_y: float = 0.25
    var_lambda: float = 4.0e-5  # rad^2

    def __post_init__(self):
        if self.airspeed <= 0:
            raise ValueError("airspeed must be positive")
        if self.turn_rate <= 0:
            raise ValueError("turn rate must be positive")
        if min(self.var_x, self.var_y, self.var_lambda) < 0:
            raise ValueError("noise variances must be non-negative")

    def controls(self) -> tuple[float, float, float]:
        return (-self.turn_rate, 0.0, self.turn_rate)

    def sigmas(self) -> tuple[float, float, float]:
        out = []
        for var in (self.var_x, self.var_y, self.var_lambda):
            if var < VARIANCE_FLOOR:
                warnings.warn(f"noise variance {var} below floor; using {VARIANCE_FLOOR}")
                var = VARIANCE_FLOOR
            out.append(math.sqrt(var))
        return tuple(out)


def mean_step(x, y, lam, u_rad_min, params: AircraftParams, dt_minutes: float):
    """Noise-free successor of the dynamics; u is the yaw rate in rad/min."""
    dt_h = dt_minutes / 60.0
    return (x + dt_h * (params.airspeed * np.cos(lam) + params.wind_u),
            y + dt_h * (params.airspeed * np.sin(lam) + params.wind_v),
            lam + dt_minutes * u_rad_min)


def _line_weights(mean_offset: float, sigma: float, spacing: float):
    """Offsets (in cells) and normalized weights for one linear dimension."""
    if 4.0 * sigma < 0.5 * spacing:
        # Degenerate noise: point mass on the cell containing the mean successor.
        return np.array([math.floor(mean_offset / spacing + 0.5)]), np.array([1.0])
    lo = math.floor((mean_offset - 4.0 * sigma) / spacing) - 1
    hi = math.ceil((mean_offset + 4.0 * sigma) / spacing) + 1
    offsets = np.arange(lo, hi + 1)
    z = (offsets * spacing - mean_offset) / sigma
    w = np.exp(-0.5 * z * z)
    total = w.sum()
    if total == 0.0:
        return np.array([math.floor(mean_offset / spacing + 0.5)]), np.array([1.0])
    return offsets, w / total


def _heading_weights(lam_mean: float, sigma: float, grid: GridSpec):
    """Successor heading cells (wrapped) and normalized weights."""
    dlam = grid.dlam
    jm = (lam_mean + math.pi) / dlam  # continuous target index
    if 4.0 * sigma < 0.5 * dlam:
        return np.array([int(math.floor(jm + 0.5)) % grid.n_lambda]), np.array([1.0])
    lo = math.floor(jm - 4.0 * sigma / dlam) - 1
    hi = math.ceil(jm + 4.0 * sigma / dlam) + 1
    span = np.arange(lo, hi + 1)
    z = ((-math.pi + span * dlam) - lam_mean) / sigma
    w = np.exp(-0.5 * z * z)
    probs = np.zeros(grid.n_lambda)
    np.add.at(probs, span % grid.n_lambda, w)  # fold images beyond +-pi
    keep = np.flatnonzero(probs > 0.0)
    if keep.size == 0:
        return np.array([int(math.floor(jm + 0.5)) % grid.n_lambda]), np.array([1.0])
    return keep, probs[keep] / probs[keep].sum()


class TransitionKernel:
    """Per-(heading cell, control) successor distributions on a GridSpec.

    The x/y displacement depends only on the heading cell, so one row for
    state (ix, iy, il) under control u is the outer product of stored x, y,
    and heading factors, with out-of-domain position mass collected on the
    lost state. Every row sums to 1 because each factor is normalized.
    """

    def __init__(self, grid: GridSpec, params: AircraftParams):
        if grid.dt_minutes * params.turn_rate >= math.pi:
            raise ValueError("one step may not turn more than half the heading circle")
        self.grid = grid
        self.params = params
        sx, sy, sl = params.sigmas()
        dt_h = grid.dt_minutes / 60.0
        self._x: list[list] = []
        self._y: list[list] = []
        self._lam: list[list] = []
        for u in params.controls():
            xs, ys, lams = [], [], []
            for lam in grid.lambda_centers:
                mx = dt_h * (params.airspeed * math.cos(lam) + params.wind_u)
                my = dt_h * (params.airspeed * math.sin(lam) + params.wind_v)
                ml = lam + grid.dt_minutes * u
                xs.append(_line_weights(mx, sx, grid.dx))
                ys.append(_line_weights(my, sy, grid.dy))
                lams.append(_heading_weights(ml, sl, grid))
            self._x.append(xs)
            self._y.append(ys)
            self._lam.append(lams)

    def factors(self, control_idx: int, heading_cell: int):
        return (self._x[control_idx][heading_cell],
                self._y[control_idx][heading_cell],
                self._lam[control_idx][heading_cell])

    def expected_value(self, v_next: np.ndarray, control_idx: int) -> np.ndarray:
        """E[V(s')] over successors for every state cell, one control.

        v_next is (n_x, n_y, n_lambda); the lost state carries value 0, so
        out-of-domain offsets read zero padding.
        """
        g = self.grid
        out = np.empty((g.n_x, g.n_y, g.n_lambda))
        for il in range(g.n_lambda):
            (xo, xp), (yo, yp), (lc, lp) = self.factors(control_idx, il)
            collapsed = np.einsum("xyl,l->xy", v_next[:, :, lc], lp)
            px_lo = max(0, -int(xo[0]))
            py_lo = max(0, -int(yo[0]))
            frame = np.zeros((px_lo + g.n_x + max(0, int(xo[-1])),
                              py_lo + g.n_y + max(0, int(yo[-1]))))
            frame[px_lo:px_lo + g.n_x, py_lo:py_lo + g.n_y] = collapsed
            tmp = np.zeros((frame.shape[0], g.n_y))
            for oy, py in zip(yo, yp):
                col = py_lo + int(oy)
                tmp += py * frame[:, col:col + g.n_y]
            res = np.zeros((g.n_x, g.n_y))
            for ox, px in zip(xo, xp):
                row = px_lo + int(ox)
                res += px * tmp[row:row + g.n_x, :]
            out[:, :, il] = res
        return out

    def row(self, state_index: int, control_idx: int):
        """Materialize one kernel row as (successor indices, probabilities).

        The lost state (grid.lost_index) absorbs out-of-domain mass; from the
        lost state every row is a self-loop.
        """
        g = self.grid
        if state_index == g.lost_index:
            return np.array([g.lost_index]), np.array([1.0])
        ix, iy, il = (int(v) for v in g.unflat(state_index))
        (xo, xp), (yo, yp), (lc, lp) = self.factors(control_idx, il)
        tx = ix + xo
        ty = iy + yo
        ok_x = (tx >= 0) & (tx < g.n_x)
        ok_y = (ty >= 0) & (ty < g.n_y)
        joint = np.einsum("i,j,k->ijk", xp, yp, lp)
        lost_mass = float(joint.sum() - joint[ok_x][:, ok_y, :].sum())
        idx = g.flat(tx[ok_x][:, None, None],
                     ty[ok_y][None, :, None],
                     lc[None, None, :]).ravel()
        probs = joint[np.ix_(ok_x, ok_y)].ravel()
        if lost_mass > 0.0:
            idx = np.append(idx, g.lost_index)
            probs = np.append(probs, lost_mass)
        return idx, probs

    def row_sums(self, control_idx: int) -> np.ndarray:
        """Sum over successors (incl. lost mass) for every state cell."""
        g = self.grid
        sums = np.empty((g.n_x, g.n_y, g.n_lambda))
        ix = np.arange(g.n_x)
        iy = np.arange(g.n_y)
        for il in range(g.n_lambda):
            (xo, xp), (yo, yp), (lc, lp) = self.factors(control_idx, il)
            tx = ix[:, None] + xo[None, :]
            ty = iy[:, None] + yo[None, :]
            x_in = np.where((tx >= 0) & (tx < g.n_x), xp[None, :], 0.0).sum(axis=1)
            x_out = np.where((tx < 0) | (tx >= g.n_x), xp[None, :], 0.0).sum(axis=1)
            y_in = np.where((ty >= 0) & (ty < g.n_y), yp[None, :], 0.0).sum(axis=1)
            y_out = np.where((ty < 0) | (ty >= g.n_y), yp[None, :], 0.0).sum(axis=1)
            lam_total = lp.sum()
            inside = np.outer(x_in, y_in) * lam_total
            lost = (np.outer(x_out, y_in) + np.outer(x_in, y_out)
                    + np.outer(x_out, y_out)) * lam_total
            sums[:, :, il] = inside + lost
        return sums

    def sample_successors(self, ix, iy, il, control_idx, rng: np.random.Generator):
        """Vectorized one-step sampling of the discrete chain.

        Returns (ix', iy', il', lost_mask); lost particles keep clipped
        indices but are flagged and must be treated as absorbed by the caller.
        """
        g = self.grid
        n = ix.shape[0]
        nx = np.empty(n, dtype=int)
        ny = np.empty(n, dtype=int)
        nl = np.empty(n, dtype=int)
        for u in range(3):
            for lam_cell in range(g.n_lambda):
                mask = (control_idx == u) & (il == lam_cell)
                count = int(mask.sum())
                if count == 0:
                    continue
                (xo, xp), (yo, yp), (lc, lp) = self.factors(u, lam_cell)
                pick_x = np.searchsorted(np.cumsum(xp), rng.uniform(size=count)) \
                    .clip(0, xo.size - 1)
                pick_y = np.searchsorted(np.cumsum(yp), rng.uniform(size=count)) \
                    .clip(0, yo.size - 1)
                pick_l = np.searchsorted(np.cumsum(lp), rng.uniform(size=count)) \
                    .clip(0, lc.size - 1)
                nx[mask] = ix[mask] + xo[pick_x]
                ny[mask] = iy[mask] + yo[pick_y]
                nl[mask] = lc[pick_l]
        lost = (nx < 0) | (nx >= g.n_x) | (ny < 0) | (ny >= g.n_y)
        return nx.clip(0, g.n_x - 1), ny.clip(0, g.n_y - 1), nl, lost

    def cache_key(self) -> str:
        payload = repr((self.grid, self.params)).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def build_kernel(grid: GridSpec, params: AircraftParams) -> TransitionKernel:
    return TransitionKernel(grid, params)


def _cache_path(directory, key: str) -> Path:
    return Path(directory) / f"kernel_{key}.npz"


def save_kernel_cache(kernel: TransitionKernel, directory) -> Path:
    """Persist kernel factors, keyed by a hash of grid and parameters."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arrays = {}
    for u in range(3):
        for il in range(kernel.grid.n_lambda):
            (xo, xp), (yo, yp), (lc, lp) = kernel.factors(u, il)
            tag = f"u{u}_l{il}"
            arrays[f"xo_{tag}"], arrays[f"xp_{tag}"] = xo, xp
            arrays[f"yo_{tag}"], arrays[f"yp_{tag}"] = yo, yp
            arrays[f"lc_{tag}"], arrays[f"lp_{tag}"] = lc, lp
    path = _cache_path(directory, kernel.cache_key())
    np.savez_compressed(path, **arrays)
    return path


def load_kernel_cache(grid: GridSpec, params: AircraftParams, directory):
    """Kernel restored from cache, or None when no matching file exists."""
    kernel = TransitionKernel.__new__(TransitionKernel)
    kernel.grid = grid
    kernel.params = params
    path = _cache_path(directory, kernel.cache_key())
    if not path.exists():
        return None
    with np.load(path) as data:
        kernel._x, kernel._y, kernel._lam = [], [], []
        for u in range(3):
            xs, ys, lams = [], [], []
            for il in range(grid.n_lambda):
                tag = f"u{u}_l{il}"
                xs.append((data[f"xo_{tag}"], data[f"xp_{tag}"]))
                ys.append((data[f"yo_{tag}"], data[f"yp_{tag}"]))
                lams.append((data[f"lc_{tag}"], data[f"lp_{tag}"]))
            kernel._x.append(xs)
            kernel._y.append(ys)
            kernel._lam.append(lams)
    return kernel
