"""Small argument checks shared by the public functions and estimators."""

from __future__ import annotations

import numbers

import numpy as np


def check_positive(value, name: str) -> float:
    value = check_finite_scalar(value, name)
    if value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    return value


def check_non_negative(value, name: str) -> float:
    value = check_finite_scalar(value, name)
    if value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return value


def check_finite_scalar(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def check_count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def as_frequency_array(f, name: str = "f", *, strictly_positive: bool = True) -> np.ndarray:
    """Return ``f`` as a float array, rejecting non-finite or non-positive entries."""
    arr = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if strictly_positive and np.any(arr <= 0):
        raise ValueError(f"{name} must be > 0")
    return arr


def check_interval(interval, name: str = "interval") -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in interval)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a (low, high) pair, got {interval!r}") from None
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise ValueError(f"{name} must satisfy low <= high, got ({lo}, {hi})")
    return lo, hi


def check_psd_arrays(freqs, levels) -> tuple[np.ndarray, np.ndarray]:
    """Validate a frequency grid and its dBc/Hz levels as used by :class:`PsdTrace`.

    Levels may be ``-inf`` (zero power) but never NaN or ``+inf``.
    """
    freqs = np.asarray(freqs, dtype=float).ravel()
    levels = np.asarray(levels, dtype=float).ravel()
    if freqs.shape != levels.shape:
        raise ValueError(
            f"freqs and levels must have equal length, got {freqs.size} and {levels.size}"
        )
    if freqs.size == 0:
        raise ValueError("trace must contain at least one point")
    if not np.all(np.isfinite(freqs)) or np.any(freqs <= 0):
        raise ValueError("freqs must be finite and > 0")
    if np.any(np.diff(freqs) <= 0):
        raise ValueError("freqs must be strictly increasing")
    if np.any(np.isnan(levels)) or np.any(levels == np.inf):
        raise ValueError("levels must not contain NaN or +inf")
    return freqs, levels
