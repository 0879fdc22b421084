"""Matplotlib figure rendering for fields, value functions, and rollouts.

Figures are written next to the delimited outputs; the Agg backend keeps
rendering headless and byte-deterministic for a fixed input.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .rollout import ObservedCells, RolloutReport
from .solver import Solution
from .stormfield import StormField

FIG_DPI = 130


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=FIG_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def _field_image(ax, field: StormField, tau: int):
    g = field.grid
    im = ax.imshow(field.values[tau].T, origin="lower", vmin=0.0, vmax=1.0,
                   extent=(g.x_min, g.x_max, g.y_min, g.y_max),
                   cmap="magma_r", aspect="equal")
    return im


def _goal_patch(goal):
    x_lo, x_hi, y_lo, y_hi = goal
    return Rectangle((x_lo, y_lo), x_hi - x_lo, y_hi - y_lo,
                     facecolor="none", edgecolor="tab:green", lw=1.8)


def plot_field(field: StormField, tau: int, path, goal=None) -> Path:
    fig, ax = plt.subplots(figsize=(7.0, 6.2))
    im = _field_image(ax, field, tau)
    fig.colorbar(im, ax=ax, label="probability of storm")
    if goal is not None:
        ax.add_patch(_goal_patch(goal))
    ax.set_xlabel("x [km]")
    ax.set_ylabel("y [km]")
    ax.set_title(f"storm probability, {10 * tau} min after issue")
    return _save(fig, path)


def plot_value_slice(solution: Solution, t: int, heading_cell: int, path,
                     goal=None, start=None) -> Path:
    g = solution.grid
    fig, ax = plt.subplots(figsize=(7.0, 6.2))
    im = ax.imshow(solution.value[t, :, :, heading_cell].T, origin="lower",
                   vmin=0.0, vmax=1.0,
                   extent=(g.x_min, g.x_max, g.y_min, g.y_max),
                   cmap="viridis", aspect="equal")
    fig.colorbar(im, ax=ax, label="reach-avoid probability")
    if goal is not None:
        ax.add_patch(_goal_patch(goal))
    if start is not None:
        ax.plot(start[0], start[1], marker="*", ms=12, color="white",
                mec="black")
    lam = g.lambda_centers[heading_cell]
    ax.set_xlabel("x [km]")
    ax.set_ylabel("y [km]")
    ax.set_title(f"value at step {t}, heading {lam:.2f} rad")
    return _save(fig, path)


def plot_rollouts(report: RolloutReport, path, field: StormField | None = None,
                  field_tau: int | None = None,
                  observed: ObservedCells | None = None, goal=None,
                  start=None) -> Path:
    """Mean trajectory with 2-sigma bounds over observed boxes and the field."""
    fig, ax = plt.subplots(figsize=(7.0, 6.2))
    if field is not None:
        tau = field.n_horizons if field_tau is None else field_tau
        im = _field_image(ax, field, tau)
        fig.colorbar(im, ax=ax, label="probability of storm")
    if observed is not None:
        for boxes in observed.boxes:
            for west, east, south, north in boxes:
                ax.add_patch(Rectangle((west, south), east - west, north - south,
                                       facecolor="none", edgecolor="tab:red",
                                       lw=0.7, alpha=0.8))
    mean, sig = report.mean_path, report.sigma_path
    ax.plot(mean[:, 0], mean[:, 1], color="tab:blue", lw=2.0,
            label="mean trajectory")
    for sign in (-2.0, 2.0):
        ax.plot(mean[:, 0] + sign * sig[:, 0], mean[:, 1] + sign * sig[:, 1],
                color="tab:blue", lw=0.8, ls="--")
    if goal is not None:
        ax.add_patch(_goal_patch(goal))
    if start is not None:
        ax.plot(start[0], start[1], marker="*", ms=12, color="gold", mec="black")
    ax.set_xlabel("x [km]")
    ax.set_ylabel("y [km]")
    ax.set_title(f"{report.n_rollouts} rollouts, "
                 f"{100.0 * report.success_fraction:.1f}% successful")
    ax.legend(loc="lower right")
    return _save(fig, path)
