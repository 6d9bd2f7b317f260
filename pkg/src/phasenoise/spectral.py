"""Phase-noise PSD traces estimated from simulated baseband samples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, signal

from ._validation import check_count, check_positive, check_psd_arrays

__all__ = [
    "PsdTrace",
    "welch_psd",
    "average_traces",
    "log_resample",
    "integrated_power",
    "level_at",
]

_WINDOWS = {"hann": "hann", "rect": "boxcar"}


@dataclass(frozen=True)
class PsdTrace:
    """Single-sideband phase-noise samples: offsets in Hz and levels in dBc/Hz.

    A level of ``-inf`` stands for a bin with zero power.
    """

    freqs: np.ndarray
    levels: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        freqs, levels = check_psd_arrays(self.freqs, self.levels)
        freqs = freqs.copy()
        levels = levels.copy()
        freqs.flags.writeable = False
        levels.flags.writeable = False
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "levels", levels)

    def __len__(self) -> int:
        return self.freqs.size

    @property
    def linear(self) -> np.ndarray:
        """Levels as linear power density (1/Hz relative to the carrier)."""
        return 10.0 ** (self.levels / 10.0)

    def select(self, interval) -> "PsdTrace":
        lo, hi = interval
        mask = (self.freqs >= lo) & (self.freqs <= hi)
        if not mask.any():
            raise ValueError(f"no trace points in [{lo:g}, {hi:g}] Hz")
        return PsdTrace(self.freqs[mask], self.levels[mask], dict(self.meta))


def _to_db(power: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(power)


def welch_psd(
    samples,
    fs: float,
    segment_len: int | None = None,
    overlap: float = 0.5,
    window: str = "hann",
) -> PsdTrace:
    """Averaged modified periodogram of baseband samples as a phase-noise trace.

    The two-sided density (per Hz) is normalized by the mean signal power
    and reported at strictly positive offsets only; the DC (carrier) bin is
    dropped.  A 2-D input of shape ``(realizations, n)`` is averaged over
    realizations as well as segments.

    Parameters
    ----------
    samples : array_like, complex
        Baseband samples, e.g. from :func:`phasenoise.timegen.alpha_to_baseband`.
    fs : float
        Sample rate in Hz.
    segment_len : int, optional
        Segment length; defaults to ``n // 8``.
    overlap : float
        Overlap fraction between segments, in ``[0, 0.9]``.
    window : {"hann", "rect"}
    """
    x = np.asarray(samples)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.ndim != 2:
        raise ValueError("samples must be 1-D or (realizations, n)")
    fs = check_positive(fs, "fs")
    n = x.shape[1]
    if segment_len is None:
        segment_len = n // 8
    segment_len = check_count(segment_len, "segment_len", minimum=2)
    if n < 2 or segment_len > n:
        raise ValueError(f"input too short: {n} samples for segment_len {segment_len}")
    if not 0.0 <= overlap <= 0.9:
        raise ValueError(f"overlap must be in [0, 0.9], got {overlap}")
    if window not in _WINDOWS:
        raise ValueError(f"window must be one of {sorted(_WINDOWS)}, got {window!r}")
    noverlap = int(round(overlap * segment_len))
    if noverlap >= segment_len:
        noverlap = segment_len - 1
    freqs, pxx = signal.welch(
        x.astype(complex),
        fs=fs,
        window=_WINDOWS[window],
        nperseg=segment_len,
        noverlap=noverlap,
        detrend=False,
        return_onesided=False,
        scaling="density",
        axis=-1,
    )
    power = np.mean(np.abs(x) ** 2, axis=-1, keepdims=True)
    if np.any(power == 0):
        raise ValueError("input has zero power")
    pxx = np.mean(pxx / power, axis=0)
    keep = freqs > 0
    order = np.argsort(freqs[keep])
    n_segments = 1 + (n - segment_len) // (segment_len - noverlap)
    meta = {
        "rbw_hz": fs / segment_len,
        "window": window,
        "segment_len": segment_len,
        "overlap": overlap,
        "averages": n_segments * x.shape[0],
    }
    return PsdTrace(freqs[keep][order], _to_db(pxx[keep][order]), meta)


def average_traces(traces) -> PsdTrace:
    """Bin-wise mean of linear power across traces sharing one frequency grid."""
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    grid = traces[0].freqs
    for i, tr in enumerate(traces[1:], start=1):
        if tr.freqs.shape != grid.shape or not np.array_equal(tr.freqs, grid):
            raise ValueError(f"trace {i} frequency grid differs from trace 0")
    mean = np.mean([tr.linear for tr in traces], axis=0)
    meta = dict(traces[0].meta)
    meta["averaged_traces"] = len(traces)
    return PsdTrace(grid, _to_db(mean), meta)


def log_resample(trace: PsdTrace, points_per_decade: int) -> PsdTrace:
    """Bin a trace onto a logarithmic grid.

    Bin edges sit at multiples of ``1 / points_per_decade`` decades.  Each
    non-empty bin becomes one point at the geometric-mean frequency of its
    members with the geometric mean of their linear power (the mean of the
    dB levels).  Empty bins are dropped.
    """
    ppd = check_count(points_per_decade, "points_per_decade")
    logf = np.log10(trace.freqs)
    idx = np.floor(logf * ppd + 1e-9).astype(np.int64)
    uniq, inverse, counts = np.unique(idx, return_inverse=True, return_counts=True)
    freqs = 10.0 ** (np.bincount(inverse, weights=logf) / counts)
    # singleton bins keep their frequency exactly
    freqs = np.where(counts == 1, np.bincount(inverse, weights=trace.freqs), freqs)
    if np.any(np.isneginf(trace.levels)):
        has_zero = np.bincount(inverse, weights=np.isneginf(trace.levels)) > 0
        finite = np.where(np.isneginf(trace.levels), 0.0, trace.levels)
        levels = np.bincount(inverse, weights=finite) / counts
        levels[has_zero] = -np.inf
    else:
        levels = np.bincount(inverse, weights=trace.levels) / counts
    meta = dict(trace.meta)
    meta["points_per_decade"] = ppd
    meta["bin_counts"] = counts.tolist()
    return PsdTrace(freqs, levels, meta)


def integrated_power(trace: PsdTrace) -> float:
    """Trapezoidal integral of the linear density over the trace's span."""
    if len(trace) < 2:
        return 0.0
    return float(integrate.trapezoid(trace.linear, trace.freqs))


def level_at(trace: PsdTrace, f: float) -> float:
    """Level of the trace point nearest to ``f`` on a log axis."""
    i = int(np.argmin(np.abs(np.log10(trace.freqs) - math.log10(f))))
    return float(trace.levels[i])
