"""Decay diagnostics and classification of an energy time series.

Three curves are derived from (t, E):

* ``d1 = -ln(E)/t``      tends to a positive constant under exponential decay,
* ``d2 = t*E``           stays bounded iff E = O(1/t),
* ``d3 = -ln(E)/ln(t)``  tends to alpha when E ~ t^-alpha.

:func:`classify` turns a series into one of Conserved / Exponential /
Polynomial / Undetermined with explicit, configurable thresholds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "CONSERVED",
    "EXPONENTIAL",
    "POLYNOMIAL",
    "UNDETERMINED",
    "Thresholds",
    "DecaySeries",
    "DecayReport",
    "PowerLawFit",
    "InsufficientData",
    "diagnostics",
    "fit_polynomial_exponent",
    "anchored_rate",
    "exponent_reading",
    "classify",
]

CONSERVED = "Conserved"
EXPONENTIAL = "Exponential"
POLYNOMIAL = "Polynomial"
UNDETERMINED = "Undetermined"
CLASSES = (CONSERVED, EXPONENTIAL, POLYNOMIAL, UNDETERMINED)


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    conserved_rtol: float = 1e-8
    exp_band: float = 0.15
    poly_r2: float = 0.98
    poly_stability: float = 0.10
    window: float = 0.1
    window_alt: float = 0.3
    min_points: int = 10
    resample_points: int = 200

    def __post_init__(self):
        for name in ("window", "window_alt"):
            w = getattr(self, name)
            if not 0.0 < w < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {w}")


@dataclass(frozen=True)
class DecaySeries:
    """Energy samples with the derived curves; NaN marks an undefined value."""

    t: np.ndarray
    E: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray

    def __len__(self):
        return self.t.size


def diagnostics(t: Sequence[float], E: Sequence[float]) -> DecaySeries:
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    if t.size == 0:
        raise ValueError("empty energy series")
    if t.shape != E.shape or t.ndim != 1:
        raise ValueError(f"t and E must be 1-D of equal length, got {t.shape} and {E.shape}")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if t[0] < 0:
        raise ValueError("times must be nonnegative")
    pos = E > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lnE = np.where(pos, np.log(np.where(pos, E, 1.0)), np.nan)
        d1 = np.where(pos & (t > 0), -lnE / np.where(t > 0, t, 1.0), np.nan)
        d3 = np.where(pos & (t > 1), -lnE / np.log(np.where(t > 1, t, math.e)), np.nan)
        d2 = t * E
    return DecaySeries(t=t, E=E, d1=d1, d2=d2, d3=d3)


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    r2: float
    degenerate: bool
    t_lo: float
    t_hi: float
    n_points: int


def _tail(series: DecaySeries, w: float, need_t_gt_1: bool = True):
    t_max = series.t[-1]
    keep = (series.t >= w * t_max) & (series.E > 0)
    if need_t_gt_1:
        keep &= series.t > 1
    return series.t[keep], series.E[keep]


def fit_polynomial_exponent(series: DecaySeries, w: float = 0.1, points: int = 200,
                            min_points: int = 10) -> PowerLawFit:
    """Least-squares slope of ln E against ln t over ``[w t_max, t_max]``.

    ln E is linearly interpolated onto ``points`` nodes uniform in ln t
    before fitting, so every decade of the window weighs the same.
    ``alpha`` is minus the slope; ``r2`` is clipped to [0, 1] and a
    constant series is reported as ``degenerate`` with ``r2 = 0``.
    """
    if not 0.0 < w < 1.0:
        raise ValueError(f"window fraction must lie in (0, 1), got {w}")
    t, E = _tail(series, w)
    if t.size < min_points:
        raise InsufficientData(f"{t.size} usable samples in the tail window, need {min_points}")
    lt, lE = np.log(t), np.log(E)
    grid = np.linspace(lt[0], lt[-1], max(points, 2))
    g = np.interp(grid, lt, lE)
    slope, intercept = np.polyfit(grid, g, 1)
    resid = g - (slope * grid + intercept)
    ss_tot = float(np.sum((g - g.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    degenerate = ss_tot <= 1e-300 or ss_tot <= 1e-24 * max(1.0, float(np.sum(g ** 2)))
    if degenerate:
        slope, r2 = 0.0, 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return PowerLawFit(alpha=float(-slope) + 0.0, r2=r2, degenerate=degenerate,
                       t_lo=float(t[0]), t_hi=float(t[-1]), n_points=int(t.size))


def anchored_rate(series: DecaySeries, w: float = 0.1, min_points: int = 10) -> np.ndarray:
    """Decay-rate probe ``-ln(E(t)/E(t_lo)) / (t - t_lo)`` over the tail.

    This is d1 computed on the tail alone, with energy and time measured from
    the first sample ``t_lo`` of ``[w t_max, t_max]``.  It is exactly
    constant for ``E = K exp(-w t)`` whatever K is.  Evaluated on the later
    half of the window, where the denominator is at least half its length.
    """
    t, E = _tail(series, w, need_t_gt_1=False)
    if t.size < 2:
        raise InsufficientData("fewer than 2 positive samples in the tail window")
    t_lo, E_lo = t[0], E[0]
    late = t >= t_lo + 0.5 * (t[-1] - t_lo)
    late[0] = False
    if np.count_nonzero(late) < min_points:
        raise InsufficientData(f"{np.count_nonzero(late)} samples in the late window, need {min_points}")
    return -np.log(E[late] / E_lo) / (t[late] - t_lo)


def exponent_reading(series: DecaySeries, weight: float = 1.0) -> Optional[float]:
    """``-ln(weight * E)/ln(t)`` at the last sample: the late-time value of d3.

    ``weight`` rescales the energy before reading (e.g. the grid spacing, for
    an energy normalised as a Riemann sum).  None when undefined.
    """
    t, E = series.t[-1], series.E[-1]
    if t <= 1 or E <= 0:
        return None
    return float(-math.log(weight * E) / math.log(t))


@dataclass(frozen=True)
class DecayReport:
    classification: str
    alpha: Optional[float] = None
    exp_rate: Optional[float] = None
    window: tuple[float, float] = (0.0, 0.0)
    r2: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.classification not in CLASSES:
            raise ValueError(f"unknown classification {self.classification!r}")
        if (self.alpha is not None) != (self.classification == POLYNOMIAL):
            raise ValueError("alpha must be present exactly for Polynomial reports")
        if self.r2 is not None and not 0.0 <= self.r2 <= 1.0:
            raise ValueError(f"r2 out of range: {self.r2}")

    def summary_line(self) -> str:
        parts = [f"CLASS={self.classification}"]
        if self.alpha is not None:
            parts.append(f"ALPHA={self.alpha:.2f}")
        if self.exp_rate is not None:
            parts.append(f"RATE={self.exp_rate:.4g}")
        if self.r2 is not None:
            parts.append(f"R2={self.r2:.3f}")
        return " ".join(parts)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DecayReport":
        d = dict(d)
        d["window"] = tuple(d.get("window", (0.0, 0.0)))
        return cls(**d)


def classify(series: DecaySeries, thresholds: Thresholds = Thresholds()) -> DecayReport:
    """Decide the decay regime of ``series``.

    1. Conserved: ``|E(t_max) - E(t_0)| <= conserved_rtol * E(t_0)``.
    2. Exponential: the anchored tail rate (see :func:`anchored_rate`) is
       positive with ``(max - min)/mean <= exp_band``.
    3. Polynomial: the log-log fit over ``[window * t_max, t_max]`` has
       ``r2 >= poly_r2``, a positive exponent, and the exponent over
       ``[window_alt * t_max, t_max]`` is within ``poly_stability``
       (relative) of it.
    4. Undetermined otherwise, including too few usable samples.
    """
    th = thresholds
    t, E = series.t, series.E
    t_max = float(t[-1])
    window = (th.window * t_max, t_max)
    diag: dict = {"E_first": float(E[0]), "E_last": float(E[-1]), "n_samples": int(t.size)}
    if E[0] > 0:
        diag["E_ratio"] = float(E[-1] / E[0])

    drift = abs(E[-1] - E[0])
    diag["relative_drift"] = float(drift / E[0]) if E[0] > 0 else float(drift)
    if drift <= th.conserved_rtol * E[0] or (E[0] == 0 and drift == 0):
        return DecayReport(CONSERVED, window=window, diagnostics=diag)

    tail_d1 = series.d1[(t >= window[0]) & np.isfinite(series.d1)]
    if tail_d1.size:
        diag["d1_tail_mean"] = float(tail_d1.mean())
    d3_last = exponent_reading(series)
    if d3_last is not None:
        diag["d3_last"] = d3_last

    try:
        rate = anchored_rate(series, th.window, th.min_points)
        mean = float(rate.mean())
        band = float((rate.max() - rate.min()) / mean) if mean != 0 else math.inf
        diag["rate_mean"] = mean
        diag["rate_band"] = band
        if mean > 0 and band <= th.exp_band:
            fit = _try_fit(series, th.window, th)
            if fit is not None:
                diag["alpha_window"] = fit.alpha
                diag["r2_window"] = fit.r2
            return DecayReport(EXPONENTIAL, exp_rate=mean, window=window,
                               r2=fit.r2 if fit else None, diagnostics=diag)
    except InsufficientData as exc:
        diag["rate_error"] = str(exc)

    fit = _try_fit(series, th.window, th)
    alt = _try_fit(series, th.window_alt, th)
    if fit is None:
        return DecayReport(UNDETERMINED, window=window, diagnostics=diag)
    diag["alpha_window"] = fit.alpha
    diag["r2_window"] = fit.r2
    if alt is not None:
        diag["alpha_window_alt"] = alt.alpha
        diag["r2_window_alt"] = alt.r2
    stable = (alt is not None and fit.alpha > 0
              and abs(alt.alpha - fit.alpha) <= th.poly_stability * abs(fit.alpha))
    if not fit.degenerate and fit.r2 >= th.poly_r2 and stable:
        return DecayReport(POLYNOMIAL, alpha=fit.alpha, window=window, r2=fit.r2, diagnostics=diag)
    return DecayReport(UNDETERMINED, window=window, r2=fit.r2, diagnostics=diag)


def _try_fit(series: DecaySeries, w: float, th: Thresholds) -> Optional[PowerLawFit]:
    try:
        return fit_polynomial_exponent(series, w, th.resample_points, th.min_points)
    except InsufficientData:
        return None
