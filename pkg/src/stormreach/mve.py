"""Minimum-volume enclosing ellipses via Khachiyan's first-order iteration."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_TOLERANCE = 1e-4
PAD_KM = 1.0  # minimum semi-axis for degenerate point sets; a storm has extent


@dataclass(frozen=True)
class Ellipse:
    """Ellipse {x : (x - center)^T shape (x - center) <= 1} with SPD shape matrix."""

    center: np.ndarray  # (2,)
    shape: np.ndarray  # (2, 2) symmetric positive definite, km^-2

    @property
    def area(self) -> float:
        return math.pi / math.sqrt(float(np.linalg.det(self.shape)))

    def contains(self, points, tol: float = 0.0):
        """Membership test, quadratic form <= 1 + tol; vectorized over rows."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        diff = pts - self.center
        q = np.einsum("ni,ij,nj->n", diff, self.shape, diff)
        inside = q <= 1.0 + tol
        return bool(inside[0]) if np.asarray(points).ndim == 1 else inside

    def semi_axes(self):
        """(major, minor) semi-axis lengths and the major-axis angle in radians."""
        vals, vecs = np.linalg.eigh(self.shape)
        axes = 1.0 / np.sqrt(vals)  # eigh sorts ascending, so axes[0] is major
        return float(axes[0]), float(axes[1]), float(math.atan2(vecs[1, 0], vecs[0, 0]))


def _axis_aligned(center, a: float, b: float, angle: float) -> Ellipse:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    shape = rot @ np.diag([1.0 / a**2, 1.0 / b**2]) @ rot.T
    return Ellipse(center=np.asarray(center, dtype=float), shape=(shape + shape.T) / 2.0)


def _degenerate_ellipse(points: np.ndarray, pad: float) -> Ellipse:
    """Capsule fallback for <3 points or collinear sets: pad the thin axis."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    direction = vt[0] if svals[0] > 0 else np.array([1.0, 0.0])
    t = centered @ direction
    mid = (t.max() + t.min()) / 2.0
    half = (t.max() - t.min()) / 2.0
    center = centroid + mid * direction
    # Points at the span ends sit exactly on the boundary vertex, so they are inside.
    a = max(half, pad)
    return _axis_aligned(center, a, pad, math.atan2(direction[1], direction[0]))


def min_volume_ellipse(points, tolerance: float = DEFAULT_TOLERANCE,
                       pad: float = PAD_KM, max_iter: int = 100_000) -> Ellipse:
    """Smallest-area ellipse enclosing `points`, to a (1 + tolerance) guarantee.

    Every input point satisfies the membership test: the final shape matrix is
    rescaled so the farthest point lands exactly on the boundary.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] < 1:
        raise ValueError("minimum-volume ellipse needs at least one point")
    if pts.shape[1] != 2:
        raise ValueError("points must be 2-dimensional")
    if pts.shape[0] == 1:
        return _axis_aligned(pts[0], pad, pad, 0.0)
    centered = pts - pts.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if pts.shape[0] == 2 or svals[-1] <= 1e-9 * max(svals[0], 1.0):
        return _degenerate_ellipse(pts, pad)

    n, d = pts.shape
    q = np.vstack([pts.T, np.ones(n)])  # (d+1, n) lifted points
    u = np.full(n, 1.0 / n)
    dp1 = d + 1.0
    for _ in range(max_iter):
        v = q @ (u[:, None] * q.T)
        try:
            m = np.einsum("in,in->n", q, np.linalg.solve(v, q))
        except np.linalg.LinAlgError:
            return _degenerate_ellipse(pts, pad)
        j_add = int(np.argmax(m))
        if m[j_add] / dp1 - 1.0 <= tolerance:
            break
        # Wolfe-Atwood: also allow decrease steps on support points, which
        # converges far faster than plain Frank-Wolfe ascent.
        support = u > 1e-12
        j_drop = int(np.flatnonzero(support)[np.argmin(m[support])])
        if m[j_add] - dp1 >= dp1 - m[j_drop] or m[j_drop] >= dp1:
            step = (m[j_add] - dp1) / (dp1 * (m[j_add] - 1.0))
            u *= 1.0 - step
            u[j_add] += step
        else:
            step = max((m[j_drop] - dp1) / (dp1 * (m[j_drop] - 1.0)),
                       -u[j_drop] / (1.0 - u[j_drop]))
            u *= 1.0 - step
            u[j_drop] += step
    center = pts.T @ u
    cov = pts.T @ (u[:, None] * pts) - np.outer(center, center)
    try:
        shape = np.linalg.inv(cov) / d
    except np.linalg.LinAlgError:
        return _degenerate_ellipse(pts, pad)
    shape = (shape + shape.T) / 2.0
    diff = pts - center
    worst = float(np.max(np.einsum("ni,ij,nj->n", diff, shape, diff)))
    if worst > 1.0:
        shape = shape / worst  # exact containment at negligible area cost
    return Ellipse(center=center, shape=shape)
