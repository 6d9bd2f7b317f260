"""Parameter estimation for the PLL phase-noise spectrum model.

The trace is split into four regions (REF roll-off, flat transition, VCO
roll-off, noise floor).  Tail regions yield 3 dB cut-offs and oscillator
constants, flat regions yield levels, and the corner frequencies follow from
intersecting those levels with the fitted low-pass models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from ._validation import check_interval, check_positive
from .model import SpectrumModelParams, extended_psd
from .spectral import PsdTrace

__all__ = [
    "FitError",
    "SegmentSpec",
    "FitConfig",
    "FitReport",
    "REGION_NAMES",
    "REPORT_KEYS",
    "linear_regression_loglog",
    "local_slopes",
    "classify_regions",
    "estimate_f3db",
    "estimate_c",
    "estimate_level",
    "estimate_corner",
    "lowpass_level",
    "fit_pipeline",
    "summarize_reports",
]

REGION_NAMES = ("ref", "transition", "vco", "noise_floor")


class FitError(ValueError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class SegmentSpec:
    """Frequency intervals (Hz, inclusive) of the four characteristic regions."""

    ref: tuple
    transition: tuple
    vco: tuple
    noise_floor: tuple

    def __post_init__(self):
        previous = None
        for name in REGION_NAMES:
            lo, hi = check_interval(getattr(self, name), name)
            if lo <= 0:
                raise ValueError(f"{name} interval must lie at positive frequencies")
            if previous is not None and lo <= previous[1]:
                raise ValueError(
                    f"{name} interval [{lo:g}, {hi:g}] overlaps or precedes "
                    f"{previous[0]} interval ending at {previous[1]:g}"
                )
            object.__setattr__(self, name, (lo, hi))
            previous = (name, hi)

    def items(self):
        return [(name, getattr(self, name)) for name in REGION_NAMES]

    def check_against(self, trace: PsdTrace, min_points: int = 3) -> None:
        for name, (lo, hi) in self.items():
            count = int(np.count_nonzero((trace.freqs >= lo) & (trace.freqs <= hi)))
            if count < min_points:
                raise ValueError(
                    f"{name} interval [{lo:g}, {hi:g}] holds {count} trace points, "
                    f"need {min_points}"
                )


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit_pipeline`.

    ``segments`` bypasses automatic region classification.
    ``outlier_db`` drops points further than this from the median residual of
    each region's straight-line fit (``None`` disables the mask).
    ``mean_f3db=False`` uses the plain sum in the cut-off estimator instead of
    the mean.
    """

    k_ref: float = 3
    k_vco: float = 3
    window_decades: float = 1.0 / 3.0
    slope_tol: float = 7.0
    plateau_tol: float = 7.0
    min_points: int = 3
    segments: SegmentSpec | None = None
    outlier_db: float | None = 10.0
    mean_f3db: bool = True


REPORT_KEYS = (
    "slopes_db_per_decade",
    "f_3db_ref_hz",
    "f_3db_vco_hz",
    "c_ref_s",
    "c_vco_s",
    "level_tr_dbc_hz",
    "level_nf_dbc_hz",
    "f_tr_hz",
    "f_pll_hz",
    "f_nf_hz",
    "k_ref",
    "k_vco",
    "residual_rms_db",
)

_REPORT_FIELDS = dict(
    zip(
        REPORT_KEYS,
        (
            "slopes",
            "f_3db_ref",
            "f_3db_vco",
            "c_ref",
            "c_vco",
            "level_tr",
            "level_nf",
            "f_tr",
            "f_pll",
            "f_nf",
            "k_ref",
            "k_vco",
            "residual_rms_db",
        ),
    )
)


@dataclass(frozen=True)
class FitReport:
    slopes: dict
    f_3db_ref: float
    f_3db_vco: float
    c_ref: float
    c_vco: float
    level_tr: float
    level_nf: float
    f_tr: float
    f_pll: float
    f_nf: float
    k_ref: float
    k_vco: float
    residual_rms_db: float
    segments: SegmentSpec | None = field(default=None, compare=False)

    @property
    def params(self) -> SpectrumModelParams:
        return SpectrumModelParams(
            f_3db_ref=self.f_3db_ref,
            f_tr=self.f_tr,
            f_pll=self.f_pll,
            f_nf=self.f_nf,
            k_ref=self.k_ref,
            k_vco=self.k_vco,
        )

    def to_dict(self) -> dict:
        out = {}
        for key, attr in _REPORT_FIELDS.items():
            value = getattr(self, attr)
            if key == "slopes_db_per_decade":
                value = {name: float(value[name]) for name in REGION_NAMES}
            else:
                value = float(value)
            out[key] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FitReport":
        """Inverse of :meth:`to_dict`; the key set must match exactly."""
        missing = [k for k in REPORT_KEYS if k not in data]
        if missing:
            raise KeyError(f"fit report missing key {missing[0]!r}")
        extra = sorted(set(data) - set(REPORT_KEYS))
        if extra:
            raise KeyError(f"fit report has unexpected key {extra[0]!r}")
        slopes = data["slopes_db_per_decade"]
        if not isinstance(slopes, dict):
            raise KeyError("slopes_db_per_decade must be an object")
        for name in REGION_NAMES:
            if name not in slopes:
                raise KeyError(f"slopes_db_per_decade missing key {name!r}")
        kwargs = {
            attr: (
                {name: float(slopes[name]) for name in REGION_NAMES}
                if key == "slopes_db_per_decade"
                else float(data[key])
            )
            for key, attr in _REPORT_FIELDS.items()
        }
        return cls(**kwargs)


def _xy(trace: PsdTrace, interval) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = check_interval(interval)
    mask = (trace.freqs >= lo) & (trace.freqs <= hi)
    return np.log10(trace.freqs[mask]), trace.levels[mask]


def linear_regression_loglog(trace: PsdTrace, interval) -> tuple[float, float]:
    """Ordinary least squares of level (dB) on ``log10(f)`` within ``interval``.

    Solves the normal equations ``R = (X^T X)^-1 X^T Y`` with
    ``X = [1, log10 f]``.  Returns ``(intercept, slope)``, the slope in dB
    per decade.
    """
    x, y = _xy(trace, interval)
    if x.size < 2:
        raise ValueError(f"need at least 2 points in {interval}, got {x.size}")
    if np.ptp(x) == 0:
        raise ValueError("singular regression: all points at one frequency")
    if not np.all(np.isfinite(y)):
        raise ValueError("levels in the regression interval must be finite")
    X = np.column_stack([np.ones_like(x), x])
    try:
        intercept, slope = np.linalg.solve(X.T @ X, X.T @ y)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular regression: {exc}") from None
    return float(intercept), float(slope)


def local_slopes(trace: PsdTrace, window_decades: float = 1.0 / 3.0) -> np.ndarray:
    """Least-squares slope (dB/decade) in a window of ``window_decades`` centred on each point.

    Points whose window holds fewer than three samples get NaN.
    """
    window_decades = check_positive(window_decades, "window_decades")
    x = np.log10(trace.freqs)
    y = trace.levels
    lo = np.searchsorted(x, x - window_decades / 2.0, side="left")
    hi = np.searchsorted(x, x + window_decades / 2.0, side="right")
    # prefix sums on centred abscissae keep the normal equations well conditioned
    xc = x - x.mean()
    cs = [np.concatenate([[0.0], np.cumsum(v)]) for v in (np.ones_like(xc), xc, y, xc * xc, xc * y)]
    n, sx, sy, sxx, sxy = (c[hi] - c[lo] for c in cs)
    with np.errstate(invalid="ignore", divide="ignore"):
        slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    slope[n < 3] = np.nan
    return slope


def _runs(mask: np.ndarray, min_points: int) -> list[tuple[int, int]]:
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, mask.size - 1))
    return [r for r in runs if r[1] - r[0] + 1 >= min_points]


def classify_regions(trace: PsdTrace, config: FitConfig | None = None) -> SegmentSpec:
    """Locate the four characteristic regions from local log-log slopes.

    Each point is labelled by the slope of a sliding regression: within
    ``slope_tol`` of ``-10 k_ref`` / ``-10 k_vco`` counts as a roll-off,
    ``|slope| < plateau_tol`` as flat.  The REF region is the first roll-off
    run that is followed by a flat run (the transition); the VCO region is
    the next roll-off run; the noise floor is the lowest-level flat run
    after it (the higher-frequency one on a tie).

    A ``config.segments`` value is returned unchanged.
    """
    config = config or FitConfig()
    if config.segments is not None:
        return config.segments
    span = math.log10(trace.freqs[-1] / trace.freqs[0])
    if span < 4.0:
        raise ValueError(f"trace spans {span:.2f} decades, need at least 4")
    slopes = local_slopes(trace, config.window_decades)
    valid = np.isfinite(slopes) & np.isfinite(trace.levels)
    flat = valid & (np.abs(slopes) < config.plateau_tol)
    roll_ref = valid & (np.abs(slopes + 10.0 * config.k_ref) <= config.slope_tol)
    roll_vco = valid & (np.abs(slopes + 10.0 * config.k_vco) <= config.slope_tol)
    m = config.min_points
    flat_runs = _runs(flat, m)
    ref_runs = _runs(roll_ref, m)
    vco_runs = _runs(roll_vco, m)

    found: dict[str, tuple[int, int] | None] = dict.fromkeys(REGION_NAMES)
    for run in ref_runs:
        if any(f[0] > run[1] for f in flat_runs):
            found["ref"] = run
            break
    after = found["ref"][1] if found["ref"] else -1
    found["transition"] = next((f for f in flat_runs if f[0] > after), None)
    if found["transition"]:
        after = found["transition"][1]
        found["vco"] = next((r for r in vco_runs if r[0] > after), None)
    if found["vco"]:
        after = found["vco"][1]
        floors = [f for f in flat_runs if f[0] > after]
        if floors:
            # lowest mean level wins; ties go to the higher-frequency run
            found["noise_floor"] = min(
                floors, key=lambda f: (float(np.mean(trace.levels[f[0] : f[1] + 1])), -f[0])
            )
    missing = [name for name in REGION_NAMES if found[name] is None]
    if missing:
        raise ValueError(f"no region found for: {', '.join(missing)}")
    f = trace.freqs
    return SegmentSpec(**{name: (f[a], f[b]) for name, (a, b) in found.items()})


def estimate_f3db(trace: PsdTrace, interval, k: float, *, mean: bool = True) -> float:
    """3 dB cut-off from a low-pass tail ``L(f) ~ f3^(k-1) / (pi f^k)``.

    ``f3 = 10 ** (avg_n log10(10^(L_n/10) pi f_n^k) / (k - 1))`` where ``avg``
    is the mean over the interval's points (``mean=False``: the plain sum).
    The interval must lie well above the cut-off.
    """
    if k <= 1:
        raise ValueError(f"k must be > 1, got {k}")
    x, y = _xy(trace, interval)
    if x.size == 0:
        raise ValueError(f"empty interval {interval}")
    terms = y / 10.0 + math.log10(math.pi) + k * x
    total = float(np.mean(terms)) if mean else float(np.sum(terms))
    return 10.0 ** (total / (k - 1.0))


def estimate_c(f_3db: float, f0: float) -> float:
    """Oscillator constant ``f_3db / (pi f0^2)`` in seconds."""
    f0 = check_positive(f0, "f0")
    return float(f_3db) / (math.pi * f0 * f0)


def estimate_level(trace: PsdTrace, interval) -> float:
    """Sample mean of the dB levels within ``interval``."""
    _, y = _xy(trace, interval)
    if y.size == 0:
        raise ValueError(f"empty interval {interval}")
    return float(np.mean(y))


def lowpass_level(f_3db: float, f, k: float):
    """Low-pass oscillator model ``10 log10(1 / (pi f3 (1 + (f/f3)^k)))`` in dBc/Hz."""
    f = np.asarray(f, dtype=float)
    out = -10.0 * np.log10(math.pi * f_3db * (1.0 + (f / f_3db) ** k))
    return out[()] if out.ndim == 0 else out


def estimate_corner(f_3db: float, level: float, k: float) -> float:
    """Offset at which the low-pass model with cut-off ``f_3db`` falls to ``level``.

    ``f = f_3db * (1 / (10^(level/10) pi f_3db) - 1)^(1/k)``.
    """
    x = 10.0 ** (level / 10.0) * math.pi * f_3db
    if not x < 1.0:
        raise ValueError("level above model plateau")
    return f_3db * (1.0 / x - 1.0) ** (1.0 / k)


def _mask_outliers(trace: PsdTrace, interval, threshold: float | None) -> PsdTrace:
    sub = trace.select(interval)
    if threshold is None or len(sub) < 3:
        return sub
    x = np.log10(sub.freqs)
    coef = np.polyfit(x, sub.levels, 1)
    resid = sub.levels - np.polyval(coef, x)
    keep = np.abs(resid - np.median(resid)) <= threshold
    if keep.sum() < 2:
        return sub
    return PsdTrace(sub.freqs[keep], sub.levels[keep], sub.meta)


def fit_pipeline(trace: PsdTrace, f0: float, config: FitConfig | None = None) -> FitReport:
    """Estimate all spectrum-model parameters from one trace.

    Stages: region classification, per-region slopes, REF/VCO cut-offs and
    oscillator constants, transition and floor levels, corner frequencies
    (``f_tr`` from the REF model, ``f_pll`` and ``f_nf`` from the VCO
    model), and the RMS residual of the resulting extended model.  Any
    failure is re-raised as :class:`FitError` naming the stage.
    """
    config = config or FitConfig()
    try:
        f0 = check_positive(f0, "f0")
    except (TypeError, ValueError) as exc:
        raise FitError("input", str(exc)) from None

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, ArithmeticError) as exc:
            raise FitError(name, str(exc)) from exc

    segments = stage("classify_regions", classify_regions, trace, config)
    stage("classify_regions", segments.check_against, trace, config.min_points)
    regions = {
        name: stage("outlier_mask", _mask_outliers, trace, interval, config.outlier_db)
        for name, interval in segments.items()
    }
    slopes = {
        name: stage("regression", linear_regression_loglog, sub, (sub.freqs[0], sub.freqs[-1]))[1]
        for name, sub in regions.items()
    }

    def whole(sub):
        return (sub.freqs[0], sub.freqs[-1])

    ref, tr, vco, nf = (regions[n] for n in REGION_NAMES)
    f3_ref = stage("estimate_f3db", estimate_f3db, ref, whole(ref), config.k_ref, mean=config.mean_f3db)
    f3_vco = stage("estimate_f3db", estimate_f3db, vco, whole(vco), config.k_vco, mean=config.mean_f3db)
    c_ref = estimate_c(f3_ref, f0)
    c_vco = estimate_c(f3_vco, f0)
    level_tr = stage("estimate_level", estimate_level, tr, whole(tr))
    level_nf = stage("estimate_level", estimate_level, nf, whole(nf))
    f_tr = stage("estimate_corner", estimate_corner, f3_ref, level_tr, config.k_ref)
    f_pll = stage("estimate_corner", estimate_corner, f3_vco, level_tr, config.k_vco)
    f_nf = stage("estimate_corner", estimate_corner, f3_vco, level_nf, config.k_vco)
    params = stage(
        "model",
        SpectrumModelParams,
        f_3db_ref=f3_ref,
        f_tr=f_tr,
        f_pll=f_pll,
        f_nf=f_nf,
        k_ref=config.k_ref,
        k_vco=config.k_vco,
    )
    finite = np.isfinite(trace.levels)
    resid = extended_psd(params, trace.freqs[finite]) - trace.levels[finite]
    rms = float(np.sqrt(np.mean(resid**2)))
    return FitReport(
        slopes=slopes,
        f_3db_ref=f3_ref,
        f_3db_vco=f3_vco,
        c_ref=c_ref,
        c_vco=c_vco,
        level_tr=level_tr,
        level_nf=level_nf,
        f_tr=f_tr,
        f_pll=f_pll,
        f_nf=f_nf,
        k_ref=float(config.k_ref),
        k_vco=float(config.k_vco),
        residual_rms_db=rms,
        segments=segments,
    )


def summarize_reports(reports) -> dict:
    """Mean and sample standard deviation of every scalar field across reports."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    out = {}
    for f in fields(FitReport):
        if f.name in ("slopes", "segments"):
            continue
        values = np.array([getattr(r, f.name) for r in reports], dtype=float)
        std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
        out[f.name] = (float(np.mean(values)), std)
    return out
