"""Log-log regression used by every decay-exponent check."""

from __future__ import annotations

import numpy as np
from scipy import stats

__all__ = ["slope_regress"]


def slope_regress(t, values, window: tuple[int, int] | None = None) -> tuple[float, float]:
    """Least-squares slope of log(values) against log(t) and its standard error.

    ``window`` is a half-open index range into the series.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("t and values must have the same length")
    if window is not None:
        t, v = t[window[0]:window[1]], v[window[0]:window[1]]
    if len(t) < 5:
        raise ValueError(f"slope_regress needs at least 5 points, got {len(t)}")
    if np.any(t <= 0) or np.any(v <= 0):
        raise ValueError("slope_regress needs positive times and values")
    fit = stats.linregress(np.log(t), np.log(v))
    return float(fit.slope), float(fit.stderr)
