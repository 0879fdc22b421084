"""Estimation of the forecast-error distributions that drive the storm model.

Center errors per forecast horizon and per-step size changes are modeled as
logistic random variables; parameters come from maximum likelihood over paired
forecast/observation archives.
"""
from __future__ import annotations

import math
import warnings
from configparser import ConfigParser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

SIGMA_FACTOR = math.pi / math.sqrt(3.0)  # logistic stddev = s * pi / sqrt(3)
SCALE_FLOOR = 1e-3  # km; growth scales are never evaluated below this


@dataclass(frozen=True)
class LogisticModel:
    """Logistic distribution with location m and scale s >= 0."""

    m: float
    s: float

    def __post_init__(self):
        if self.s < 0:
            raise ValueError(f"negative logistic scale {self.s}")

    @property
    def sigma(self) -> float:
        return self.s * SIGMA_FACTOR

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-CDF sampling; degenerates to the location when s == 0."""
        u = rng.uniform(0.0, 1.0, size=size)
        u = np.clip(u, 1e-15, 1.0 - 1e-15)
        return self.m + self.s * np.log(u / (1.0 - u))

    def loglik(self, values) -> float:
        if self.s == 0.0:
            return math.inf if np.all(np.asarray(values) == self.m) else -math.inf
        z = (np.asarray(values, dtype=float) - self.m) / self.s
        return float(np.sum(-z - math.log(self.s) - 2.0 * np.logaddexp(0.0, -z)))


def _logistic_grad_hess(values: np.ndarray, m: float, s: float):
    z = (values - m) / s
    t = np.tanh(z / 2.0)
    n = values.size
    g_m = np.sum(t) / s
    g_s = np.sum(z * t - 1.0) / s
    one_mt2 = (1.0 - t * t) / 2.0
    h_mm = -np.sum(one_mt2) / s**2
    h_ms = -np.sum(t + z * one_mt2) / s**2
    h_ss = np.sum(1.0 - 2.0 * z * t - z * z * one_mt2) / s**2
    return np.array([g_m, g_s]), np.array([[h_mm, h_ms], [h_ms, h_ss]]), n


def fit_logistic_mle(samples, grad_tol: float = 1e-8, max_iter: int = 200) -> LogisticModel:
    """Maximum-likelihood logistic fit via damped Newton iterations.

    Initialized from moment estimates (median, sample-sigma * sqrt(3)/pi);
    converges to gradient norm below `grad_tol`.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2 or np.unique(x).size < 2:
        raise DataError("logistic MLE needs at least 2 distinct values (scale would be 0)")
    m = float(np.median(x))
    s = float(np.std(x)) / SIGMA_FACTOR
    ll = LogisticModel(m, s).loglik(x)
    for _ in range(max_iter):
        grad, hess, _ = _logistic_grad_hess(x, m, s)
        if np.linalg.norm(grad) < grad_tol:
            break
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = grad / max(np.linalg.norm(grad), 1.0)
        # Damping: halve until the likelihood improves and the scale stays
        # positive. Near the optimum the true improvement drops below the
        # floating-point noise of the summed log-likelihood, so acceptance
        # tolerates decreases at that noise scale and lets Newton finish.
        alpha, improved = 1.0, False
        noise = 1e-10 * max(1.0, abs(ll))
        for _ in range(60):
            m_new, s_new = m + alpha * step[0], s + alpha * step[1]
            if s_new > 0:
                ll_new = LogisticModel(m_new, s_new).loglik(x)
                if ll_new > ll - noise:
                    m, s, ll, improved = m_new, s_new, ll_new, True
                    break
            alpha /= 2.0
        if not improved:
            break
    grad, _, _ = _logistic_grad_hess(x, m, s)
    if np.linalg.norm(grad) >= grad_tol:
        warnings.warn(f"logistic MLE stopped at gradient norm {np.linalg.norm(grad):.2e}")
    return LogisticModel(m=float(m), s=float(s))


def fit_normal_mle(samples):
    """Closed-form normal MLE: mean and stddev with divisor n."""
    x = np.asarray(samples, dtype=float)
    if x.size < 1:
        raise DataError("normal MLE needs at least one sample")
    mean = float(np.mean(x))
    std = float(np.sqrt(np.mean((x - mean) ** 2)))
    if std == 0.0:
        warnings.warn("all samples identical; fitted normal has stddev 0")
    return mean, std


def normal_loglik(samples, mean: float, std: float) -> float:
    x = np.asarray(samples, dtype=float)
    if std == 0.0:
        return math.inf if np.all(x == mean) else -math.inf
    z = (x - mean) / std
    return float(np.sum(-0.5 * z * z - math.log(std) - 0.5 * math.log(2.0 * math.pi)))


def bic(loglik: float, k_params: int, n_samples: int) -> float:
    """Bayesian information criterion, k*ln(n) - 2*loglik; lower is better."""
    if n_samples < 1:
        raise DataError(f"BIC undefined for n_samples={n_samples}")
    return k_params * math.log(n_samples) - 2.0 * loglik


@dataclass(frozen=True)
class GrowthModel:
    """Logistic size-change model whose scale grows logarithmically with cell pixels.

    scale(s_pix) = max(scale_min, scale_a + scale_b * ln(s_pix)); the location
    is size-independent. scale_min is the smallest scale over the fitted pixel
    range, so evaluation below the smallest bucket clamps there.
    """

    m: float
    scale_a: float
    scale_b: float
    scale_min: float
    size_dependent: bool = True

    def scale(self, s_pix) -> float:
        raw = self.scale_a + self.scale_b * math.log(max(float(s_pix), 1.0))
        return max(self.scale_min, raw)

    def at(self, s_pix) -> LogisticModel:
        return LogisticModel(m=self.m, s=self.scale(s_pix))

    def __call__(self, s_pix) -> LogisticModel:
        return self.at(s_pix)


def fit_growth_scale(samples, min_bucket: int = 30) -> GrowthModel:
    """Fit a size-dependent logistic model for per-step size changes.

    `samples` holds (s_pix, delta) pairs. The location is the pooled MLE; the
    scale is a least-squares line in ln(s_pix) through per-bucket MLE scales,
    with buckets at power-of-2 pixel edges merged upward until each holds at
    least `min_bucket` samples.
    """
    pix = np.asarray([p for p, _ in samples], dtype=float)
    delta = np.asarray([d for _, d in samples], dtype=float)
    if pix.size < 2:
        raise DataError("growth fit needs at least 2 samples")
    pooled = fit_logistic_mle(delta)

    def fallback(reason: str) -> GrowthModel:
        warnings.warn(f"size-independent growth model: {reason}")
        return GrowthModel(m=float(pooled.m), scale_a=float(pooled.s), scale_b=0.0,
                           scale_min=max(SCALE_FLOOR, float(pooled.s)), size_dependent=False)

    if np.unique(pix).size < 2:
        return fallback("all samples share one pixel count")

    exponents = np.floor(np.log2(np.maximum(pix, 1.0))).astype(int)
    groups = []  # sample index lists, one per merged bucket
    held = []
    for e in range(exponents.min(), exponents.max() + 1):
        held.extend(np.flatnonzero(exponents == e))
        if len(held) >= min_bucket:
            groups.append(held)
            held = []
    if held:
        if groups:
            groups[-1] = groups[-1] + held  # sparse tail merges downward
        else:
            groups.append(held)
    buckets = []  # (mean ln pixels, per-bucket MLE scale)
    for idx in groups:
        d = delta[idx]
        if np.unique(d).size < 2:
            continue
        buckets.append((float(np.mean(np.log(pix[idx]))), fit_logistic_mle(d).s))
    if len(buckets) < 2:
        return fallback("fewer than 2 usable pixel buckets")

    lnp = np.array([b[0] for b in buckets])
    scales = np.array([b[1] for b in buckets])
    b_coef, a_coef = np.polyfit(lnp, scales, 1)
    if b_coef < 0:
        warnings.warn(f"growth scale decreases with cell size (b={b_coef:.4g}); kept as fitted")
    lo = a_coef + b_coef * lnp.min()
    hi = a_coef + b_coef * lnp.max()
    scale_min = max(SCALE_FLOOR, min(lo, hi))
    return GrowthModel(m=float(pooled.m), scale_a=float(a_coef), scale_b=float(b_coef),
                       scale_min=float(scale_min), size_dependent=True)


@dataclass(frozen=True)
class ForecastErrorSample:
    """One paired forecast/observation: center error and, at horizon 1, size deltas."""

    horizon: int
    dx: float | None = None  # km, observed minus forecast
    dy: float | None = None
    dw: float | None = None  # km per 10-min step
    dh: float | None = None
    pixels: int | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon {self.horizon} < 1")


def planar_extent(obs, frame):
    """Planar west/east/south/north (km) of a cell's extremity points."""
    lon_c, lat_c = obs.center
    xw, _ = frame.project(obs.west, lat_c)
    xe, _ = frame.project(obs.east, lat_c)
    _, ys = frame.project(lon_c, obs.south)
    _, yn = frame.project(lon_c, obs.north)
    return xw, xe, ys, yn


def pair_errors(archive, frame, max_horizon: int = 6):
    """Pair forecasts against later observations across a 10-minute archive.

    Emits one sample per (cell, horizon) where the cell is observed at both
    times; horizon-1 samples also carry the observed size change, conditioned
    on the pixel count at the step start.
    """
    files = list(archive)
    if not files:
        return []
    for a, b in zip(files, files[1:]):
        gap = (b.issue_time - a.issue_time).total_seconds()
        if gap != 600.0:
            raise DataError(
                f"archive spacing must be 10 minutes; got {gap / 60:.1f} min between "
                f"{a.issue_time:%Y%m%d %H%M} and {b.issue_time:%Y%m%d %H%M}")
    samples = []
    for i, base in enumerate(files):
        for tau in range(1, max_horizon + 1):
            j = i + tau
            if j >= len(files):
                break
            later = files[j]
            for cell in base.cells:
                obs = later.cell(cell.id)
                if obs is None:
                    continue  # cell died before this horizon
                dx = dy = dw = dh = pixels = None
                fc = cell.center_forecasts[tau - 1]
                if fc is not None:
                    fx, fy = frame.project(*fc)
                    ox, oy = frame.project(*obs.center)
                    dx, dy = ox - fx, oy - fy
                if tau == 1:
                    xw0, xe0, ys0, yn0 = planar_extent(cell, frame)
                    xw1, xe1, ys1, yn1 = planar_extent(obs, frame)
                    dw = (xe1 - xw1) - (xe0 - xw0)
                    dh = (yn1 - ys1) - (yn0 - ys0)
                    pixels = cell.pixels
                if dx is None and dw is None:
                    continue
                samples.append(ForecastErrorSample(
                    horizon=tau, dx=dx, dy=dy, dw=dw, dh=dh, pixels=pixels))
    return samples


@dataclass(frozen=True)
class ErrorModelSet:
    """Fitted error models: center error per horizon plus size-growth models."""

    center_x: dict  # horizon -> LogisticModel, km
    center_y: dict
    width_growth: GrowthModel
    height_growth: GrowthModel

    @property
    def horizons(self):
        return sorted(self.center_x)

    def max_horizon(self) -> int:
        return max(self.center_x)


def fit_error_models(archive, frame, horizons=(1, 2, 3, 4), min_samples: int = 8,
                     window: int | None = None) -> ErrorModelSet:
    """Fit an ErrorModelSet from a nowcast archive.

    `window` keeps only the last N files (batch refit over a sliding window);
    horizons without at least `min_samples` center-error pairs are dropped.
    """
    files = list(archive)
    if window is not None:
        files = files[-window:]
    if len(files) < 2:
        raise DataError(f"archive of {len(files)} file(s) is too small to fit from")
    samples = pair_errors(files, frame, max_horizon=max(horizons))
    center_x, center_y = {}, {}
    for tau in horizons:
        xs = [s.dx for s in samples if s.horizon == tau and s.dx is not None]
        ys = [s.dy for s in samples if s.horizon == tau and s.dy is not None]
        if len(xs) < min_samples:
            continue
        center_x[tau] = fit_logistic_mle(xs)
        center_y[tau] = fit_logistic_mle(ys)
    if not center_x:
        raise DataError("no horizon had enough paired center errors to fit")
    size_samples_w = [(s.pixels, s.dw) for s in samples if s.dw is not None]
    size_samples_h = [(s.pixels, s.dh) for s in samples if s.dh is not None]
    if len(size_samples_w) < 2:
        raise DataError("no paired size observations; cannot fit growth models")
    width_growth = fit_growth_scale(size_samples_w)
    height_growth = fit_growth_scale(size_samples_h)
    return ErrorModelSet(center_x=center_x, center_y=center_y,
                         width_growth=width_growth, height_growth=height_growth)


def save_models(models: ErrorModelSet, path) -> None:
    """Serialize to a key/value section file loadable without the archive."""
    cfg = ConfigParser()
    cfg["meta"] = {"horizons": ", ".join(str(t) for t in models.horizons)}
    for tau in models.horizons:
        cfg[f"center_x.{tau}"] = {"m": repr(float(models.center_x[tau].m)),
                                  "s": repr(float(models.center_x[tau].s))}
        cfg[f"center_y.{tau}"] = {"m": repr(float(models.center_y[tau].m)),
                                  "s": repr(float(models.center_y[tau].s))}
    for name, g in (("growth_width", models.width_growth),
                    ("growth_height", models.height_growth)):
        cfg[name] = {"m": repr(float(g.m)), "scale_a": repr(float(g.scale_a)),
                     "scale_b": repr(float(g.scale_b)), "scale_min": repr(float(g.scale_min)),
                     "size_dependent": str(g.size_dependent)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        cfg.write(fh)


def load_models(path) -> ErrorModelSet:
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    cfg = ConfigParser()
    cfg.read(path, encoding="utf-8")
    try:
        horizons = [int(t) for t in cfg["meta"]["horizons"].split(",")]
        center_x = {t: LogisticModel(m=float(cfg[f"center_x.{t}"]["m"]),
                                     s=float(cfg[f"center_x.{t}"]["s"])) for t in horizons}
        center_y = {t: LogisticModel(m=float(cfg[f"center_y.{t}"]["m"]),
                                     s=float(cfg[f"center_y.{t}"]["s"])) for t in horizons}
        growth = {}
        for name in ("growth_width", "growth_height"):
            sec = cfg[name]
            growth[name] = GrowthModel(
                m=float(sec["m"]), scale_a=float(sec["scale_a"]),
                scale_b=float(sec["scale_b"]), scale_min=float(sec["scale_min"]),
                size_dependent=sec["size_dependent"] == "True")
    except KeyError as exc:
        raise DataError(f"model file {path} is missing section or key {exc}") from exc
    return ErrorModelSet(center_x=center_x, center_y=center_y,
                         width_growth=growth["growth_width"],
                         height_growth=growth["growth_height"])
