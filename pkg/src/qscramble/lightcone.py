"""Contours, velocity fits and collapse rescalings of sampled (r, t) fields."""
from dataclasses import dataclass, field

import numpy as np


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class ScramblingField:
    """values[i, k] sampled at site ``sites[i]`` and time ``times[k]``."""

    sites: np.ndarray
    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        sites = np.asarray(self.sites)
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(sites), len(times)):
            raise ValueError(f"values shape {values.shape} does not match ({len(sites)}, {len(times)})")
        if np.any(np.diff(times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ContourResult:
    theta: float
    sites: np.ndarray
    times: np.ndarray  # NaN where the site never crosses
    crossings: np.ndarray  # number of upward crossings seen per site

    def present(self):
        mask = ~np.isnan(self.times)
        return self.sites[mask], self.times[mask]


@dataclass(frozen=True)
class VelocityFit:
    velocity: float
    window: tuple
    residual: float
    intercept: float = 0.0
    n_points: int = 0


def _first_crossing(times, series, theta):
    above = series >= theta
    if not above.any():
        return np.nan, 0
    k = int(np.argmax(above))
    n_cross = int(above[0]) + int(np.count_nonzero(above[1:] & ~above[:-1]))
    if k == 0:
        return times[0], n_cross
    v0, v1 = series[k - 1], series[k]
    frac = (theta - v0) / (v1 - v0)
    return times[k - 1] + frac * (times[k] - times[k - 1]), n_cross


def extract_contour(fld, theta):
    """First time each site's value reaches ``theta`` (linear interpolation)."""
    if fld.values.size == 0:
        raise ValueError("cannot extract a contour from an empty field")
    out = np.empty(len(fld.sites))
    counts = np.zeros(len(fld.sites), dtype=int)
    for i, series in enumerate(fld.values):
        out[i], counts[i] = _first_crossing(fld.times, series, theta)
    return ContourResult(float(theta), fld.sites, out, counts)


def fit_butterfly_velocity(contour, window=None):
    """Least-squares slope dr/dt of the contour over a site window.

    ``window`` is an inclusive (first, last) site range; the default skips
    edge sites, ``(4, N - 2)``. The residual is the RMS deviation in time.
    """
    if window is None:
        window = (4, int(np.max(contour.sites)) - 2)
    r, t = contour.present()
    mask = (r >= window[0]) & (r <= window[1])
    r, t = r[mask].astype(float), t[mask]
    if len(r) < 3:
        raise InsufficientDataError(f"need >= 3 contour points in sites {window}, have {len(r)}")
    slope, intercept = np.polyfit(t, r, 1)
    t_fit = (r - intercept) / slope
    residual = float(np.sqrt(np.mean((t - t_fit) ** 2)))
    return VelocityFit(float(slope), tuple(window), residual, float(intercept), len(r))


def default_entropy_window(times, entropy, page):
    """Time span of the initial growth between 0.1 and 0.5 of the Page value."""
    times, entropy = np.asarray(times), np.asarray(entropy)
    above_lo = np.flatnonzero(entropy >= 0.1 * page)
    above_hi = np.flatnonzero(entropy >= 0.5 * page)
    if len(above_lo) == 0 or len(above_hi) == 0:
        raise InsufficientDataError("entropy never spans 0.1..0.5 of the Page value")
    return float(times[above_lo[0]]), float(times[above_hi[0]])


def fit_entanglement_velocity(times, entropy, window=None, page=None):
    """Least-squares slope dS/dt (nats per 1/J) in a time window.

    Without an explicit ``window`` the growth segment between 0.1 and 0.5 of
    ``page`` is used.
    """
    times, entropy = np.asarray(times, dtype=float), np.asarray(entropy, dtype=float)
    if window is None:
        if page is None:
            raise ValueError("give either a time window or the Page value")
        window = default_entropy_window(times, entropy, page)
    mask = (times >= window[0] - 1e-12) & (times <= window[1] + 1e-12)
    if mask.sum() < 3:
        raise InsufficientDataError(f"need >= 3 samples in window {window}, have {mask.sum()}")
    slope, intercept = np.polyfit(times[mask], entropy[mask], 1)
    residual = float(np.sqrt(np.mean((entropy[mask] - (slope * times[mask] + intercept)) ** 2)))
    return VelocityFit(float(slope), tuple(window), residual, float(intercept), int(mask.sum()))


def rescale_entropy(entropy, v_e):
    """Entropy divided by the entanglement velocity (curves collapse vs t)."""
    return np.asarray(entropy) / v_e


def rescale_time(times, v_b):
    """Time multiplied by the butterfly velocity (fronts collapse vs r)."""
    return np.asarray(times) * v_b
