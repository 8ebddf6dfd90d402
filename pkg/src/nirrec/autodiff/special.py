"""Log-gamma and digamma for positive arguments, vectorised over arrays.

Both functions evaluate the same Lanczos series (g = 7, nine coefficients),
so the digamma here is the exact analytic derivative of the log-gamma here.
That consistency is what finite-difference checks of gamma-based losses rely
on; swapping in a different digamma approximation would break them.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError

# Lanczos coefficients for g = 7.  Accurate to ~1e-15 in relative terms
# over the positive reals once the series is evaluated in float64.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_HALF_LOG_TWO_PI = 0.5 * np.log(2.0 * np.pi)


def _check_positive(x: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and not np.all(arr > 0.0):
        bad = float(arr.reshape(-1)[np.argmax(~(arr.reshape(-1) > 0.0))])
        raise DomainError(f"{name} requires strictly positive input, got {bad}")
    return arr


def _series_terms(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (series, series', t) for z = x with u = z - 1, t = u + g + 0.5."""
    u = x - 1.0
    series = np.full_like(u, _LANCZOS_COEF[0])
    dseries = np.zeros_like(u)
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        denom = u + i
        series = series + c / denom
        dseries = dseries - c / (denom * denom)
    t = u + _LANCZOS_G + 0.5
    return series, dseries, t


def log_gamma(x: np.ndarray) -> np.ndarray:
    """Natural log of the gamma function, elementwise, for x > 0."""
    arr = _check_positive(x, "log_gamma")
    series, _, t = _series_terms(arr)
    return _HALF_LOG_TWO_PI + (arr - 0.5) * np.log(t) - t + np.log(series)


def digamma(x: np.ndarray) -> np.ndarray:
    """Derivative of :func:`log_gamma`, elementwise, for x > 0."""
    arr = _check_positive(x, "digamma")
    series, dseries, t = _series_terms(arr)
    return np.log(t) + (arr - 0.5) / t - 1.0 + dseries / series
