"""Arrival-time features of Green's-function traces and power-law fits of distance vs time."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEAD_BAND = 1e-5
ABSOLUTE_INTERCEPTS = (-0.0002, -0.0005, -0.001, -0.0015, -0.002)
RELATIVE_INTERCEPTS = (0.001, 0.0025, 0.005, 0.0075, 0.01)  # fractions of the global max |G|
B_RATIOS = (0.94, 0.74, 0.49, 0.35)
ALPHAS = (0.90, 1.00, 1.12)
EXTREMA = ("first_local_min", "first_local_max", "first_zero")
MIN_POINTS = 4


@dataclass
class FeatureTimes:
    site: int
    first_local_min: float | None = None
    first_local_max: float | None = None
    first_zero: float | None = None
    intercepts: dict = field(default_factory=dict)  # c -> time or None

    def get(self, feature):
        if isinstance(feature, str):
            return getattr(self, feature)
        return self.intercepts.get(feature)


@dataclass
class LrFit:
    gamma: float | None
    prefactor: float | None
    residual: float | None
    points: int
    status: str  # ok | insufficient | rejected-negative

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _parabolic(t, g, k):
    """Vertex of the parabola through samples k-1, k, k+1."""
    y0, y1, y2 = g[k - 1], g[k], g[k + 1]
    den = y0 - 2.0 * y1 + y2
    if den == 0.0:
        return float(t[k])
    h = t[k + 1] - t[k]
    return float(t[k] + 0.5 * h * (y0 - y2) / den)


def _first_extremum(t, g, sign):
    s = sign * g
    inner = np.flatnonzero((s[1:-1] < s[:-2]) & (s[1:-1] < s[2:])) + 1
    return _parabolic(t, g, int(inner[0])) if len(inner) else None


def _crossing(t, g, k):
    """Linear interpolation of the level crossing between samples k-1 and k (g already shifted)."""
    g0, g1 = g[k - 1], g[k]
    if g1 == g0:
        return float(t[k])
    return float(t[k - 1] + (t[k] - t[k - 1]) * g0 / (g0 - g1))


def first_zero(t, g, dead_band=DEAD_BAND):
    above = np.flatnonzero(np.abs(g) > dead_band)
    if not len(above):
        return None
    k0 = above[0]
    ref = np.sign(g[k0])
    later = np.flatnonzero(np.sign(g[k0:]) == -ref)
    if not len(later):
        return None
    return _crossing(t, g, int(k0 + later[0]))


def intercept_time(t, g, c: float):
    """First time G reaches c (G <= c for c < 0, G >= c for c > 0); None if never."""
    if c == 0:
        raise ValueError("intercept level must be nonzero")
    t = np.asarray(t, float)
    g = np.asarray(g, float)
    hit = np.flatnonzero(g <= c) if c < 0 else np.flatnonzero(g >= c)
    if not len(hit):
        return None
    k = int(hit[0])
    if k == 0:
        return float(t[0])
    return _crossing(t, g - c, k)


def intercept_times(trace, c):
    """Scalar c gives a time (or None); a sequence gives a dict."""
    if np.ndim(c) == 0:
        return intercept_time(trace.times, trace.values, float(c))
    return {float(ci): intercept_time(trace.times, trace.values, float(ci)) for ci in c}


def detect_features(trace, dead_band: float = DEAD_BAND, intercepts: Iterable[float] = ()) -> FeatureTimes:
    t = np.asarray(trace.times, float)
    g = np.asarray(trace.values, float)
    if len(t) < 5:
        raise ValueError("feature detection needs at least 5 samples")
    ft = FeatureTimes(trace.j, _first_extremum(t, g, +1), _first_extremum(t, g, -1),
                      first_zero(t, g, dead_band))
    ft.intercepts = {float(c): intercept_time(t, g, float(c)) for c in intercepts}
    return ft


def fit_power_law(distances: Sequence[float], times: Sequence[float | None]) -> LrFit:
    """Least squares of log(distance) against log(time); absent times are skipped."""
    pts = [(d, tm) for d, tm in zip(distances, times)
           if tm is not None and d is not None and np.isfinite(tm) and tm > 0 and d > 0]
    if len(pts) < MIN_POINTS:
        return LrFit(None, None, None, len(pts), "insufficient")
    d, tm = np.array(pts).T
    X = np.column_stack([np.log(tm), np.ones(len(tm))])
    coef, *_ = np.linalg.lstsq(X, np.log(d), rcond=None)
    resid = float(np.sqrt(np.mean((X @ coef - np.log(d)) ** 2)))
    gamma, pref = float(coef[0]), float(np.exp(coef[1]))
    status = "ok" if gamma > 0 else "rejected-negative"
    return LrFit(gamma, pref, resid, len(pts), status)


def intercept_levels(traces, mode: str = "relative",
                     fractions: Sequence[float] = RELATIVE_INTERCEPTS) -> tuple[float, ...]:
    """Intercept levels c for one configuration.

    ``relative`` scales the fractions by the largest |G| over all the given
    traces and makes them negative; ``absolute`` returns the fixed negative levels
    of the reference table.
    """
    if mode == "absolute":
        return ABSOLUTE_INTERCEPTS
    if mode != "relative":
        raise ValueError(f"unknown intercept mode {mode!r}")
    amp = max(float(np.abs(tr.values).max()) for tr in traces)
    return tuple(-f * amp for f in fractions)


@dataclass
class LrInput:
    alpha: float
    b_ratio: float
    traces: list  # RamseyTrace for i = 0 and each target j
    positions: np.ndarray  # equilibrium positions (chain units)


@dataclass
class LrRow:
    alpha: float
    b_ratio: float
    feature: str
    level: float | None
    fit: LrFit


def feature_fits(entry: LrInput, levels: Sequence[float], dead_band: float = DEAD_BAND) -> list[LrRow]:
    feats = [detect_features(tr, dead_band, levels) for tr in entry.traces if tr.j != tr.i]
    x0 = entry.positions[entry.traces[0].i]
    dist = [abs(entry.positions[f.site] - x0) for f in feats]
    rows = []
    for k, c in enumerate(levels):
        rows.append(LrRow(entry.alpha, entry.b_ratio, f"intercept_{k}", float(c),
                          fit_power_law(dist, [f.intercepts[float(c)] for f in feats])))
    for name in EXTREMA:
        rows.append(LrRow(entry.alpha, entry.b_ratio, name, None,
                          fit_power_law(dist, [f.get(name) for f in feats])))
    return rows


def lr_table(entries: Iterable[LrInput], mode: str = "relative",
             fractions: Sequence[float] = RELATIVE_INTERCEPTS,
             dead_band: float = DEAD_BAND) -> list[LrRow]:
    """gamma for every (B/J0, alpha) entry and feature: 5 intercepts then min, max, zero."""
    rows = []
    for e in entries:
        rows.extend(feature_fits(e, intercept_levels(e.traces, mode, fractions), dead_band))
    return rows
