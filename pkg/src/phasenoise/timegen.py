"""Discrete-time generation of stochastic time-shift paths.

Random numbers
--------------
Every generator is a pure function of its parameters and a seed.  Seeds are
turned into :class:`numpy.random.SeedSequence` objects and sampled with a
``PCG64`` bit generator; standard normals come from
``Generator.standard_normal`` (numpy's ziggurat sampler).  Independent
streams are derived without mutating the caller's seed: stream ``i`` of a
seed sequence ``ss`` is ``SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,))``.

* :func:`gen_wiener_alpha` draws directly from the seed.
* :func:`gen_pll_alpha` draws the VCO noise from stream 0 and the REF noise
  from stream 1.
* :func:`integrate_linear_sde` draws noise channel ``j`` from stream ``j``,
  so a first-order PLL system with channels ``(vco, ref)`` consumes exactly
  the same normals as :func:`gen_pll_alpha` for the same seed.
* Ensembles use stream ``r`` of the master seed for realization ``r``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.signal import lfilter

from ._validation import check_count, check_positive
from .model import OscillatorSpec, PllSpec

__all__ = [
    "StabilityError",
    "TimeShiftSeries",
    "PllPaths",
    "SdeSystem",
    "SdePath",
    "child_seed",
    "gen_wiener_alpha",
    "wiener_alpha_ensemble",
    "gen_pll_alpha",
    "pll_alpha_ensemble",
    "pll_alpha_cumulative",
    "integrate_linear_sde",
    "alpha_to_baseband",
]

# Above this loop gain the Euler bias in the stationary variance exceeds a few percent.
EULER_WARN_GAIN = 0.1


class StabilityError(ValueError):
    """Raised when an explicit integration step would diverge."""


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None or isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be a non-negative int or SeedSequence, got {seed!r}")
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence(int(seed))


def child_seed(seed, index: int) -> np.random.SeedSequence:
    """Stream ``index`` derived from ``seed`` (the caller's seed is not mutated)."""
    ss = _as_seed_sequence(seed)
    return np.random.SeedSequence(
        ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(index),), pool_size=ss.pool_size
    )


def _normals(seed, size) -> np.ndarray:
    return np.random.Generator(np.random.PCG64(_as_seed_sequence(seed))).standard_normal(size)


def _seed_label(seed) -> str:
    ss = _as_seed_sequence(seed)
    return f"{ss.entropy}:{'/'.join(str(k) for k in ss.spawn_key)}"


@dataclass(frozen=True)
class TimeShiftSeries:
    """A sampled time-shift path ``alpha[n]`` (seconds) at interval ``dt``."""

    dt: float
    samples: np.ndarray
    kind: str = ""
    seed: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dt", check_positive(self.dt, "dt"))
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("samples must be a non-empty 1-D sequence")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def fs(self) -> float:
        return 1.0 / self.dt

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.dt


class PllPaths(NamedTuple):
    pll: TimeShiftSeries
    ref: TimeShiftSeries
    vco: TimeShiftSeries


@dataclass(frozen=True)
class SdeSystem:
    """Linear system ``dy = -A y dt + B dW`` with ``p`` states and ``q`` noise channels."""

    a: np.ndarray
    b: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.a, dtype=float))
        b = np.atleast_2d(np.array(self.b, dtype=float))
        p = a.shape[0]
        if a.shape != (p, p) or p < 1:
            raise ValueError(f"a must be square p x p, got shape {a.shape}")
        if b.ndim != 2 or b.shape[0] != p or b.shape[1] < 1:
            raise ValueError(f"b must be p x q with p = {p}, got shape {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("a and b must be finite")
        labels = tuple(self.labels) or tuple(f"y{i}" for i in range(p))
        if len(labels) != p:
            raise ValueError(f"expected {p} labels, got {len(labels)}")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "labels", labels)

    @property
    def p(self) -> int:
        return self.a.shape[0]

    @property
    def q(self) -> int:
        return self.b.shape[1]

    @classmethod
    def first_order_pll(cls, pll: PllSpec) -> "SdeSystem":
        """Detector time shift ``beta = alpha_PLL - alpha_REF`` of a first-order loop.

        Noise channel 0 drives the VCO, channel 1 the reference.
        """
        return cls(
            a=[[pll.loop_rate]],
            b=[[math.sqrt(pll.vco.c), -math.sqrt(pll.ref.c)]],
            labels=("beta",),
        )


@dataclass(frozen=True)
class SdePath:
    dt: float
    states: np.ndarray  # (n, p) or (realizations, n, p)
    labels: tuple


def _wiener_from_normals(c: float, dt: float, xi: np.ndarray) -> np.ndarray:
    lead = xi.shape[:-1]
    out = np.zeros(lead + (xi.shape[-1] + 1,))
    out[..., 1:] = math.sqrt(c * dt) * np.cumsum(xi, axis=-1)
    return out


def gen_wiener_alpha(spec: OscillatorSpec, fs: float, n: int, seed=0) -> TimeShiftSeries:
    """Time shift of a free-running oscillator sampled at ``fs``.

    ``alpha[0] = 0`` and ``alpha[m] = sqrt(c dt) * sum(xi[:m])`` with i.i.d.
    standard normals ``xi``; ``dt = 1 / fs``.
    """
    fs = check_positive(fs, "fs")
    n = check_count(n, "n")
    dt = 1.0 / fs
    alpha = _wiener_from_normals(spec.c, dt, _normals(seed, n - 1))
    return TimeShiftSeries(dt, alpha, kind="vco", seed=_seed_label(seed))


def wiener_alpha_ensemble(
    spec: OscillatorSpec, fs: float, n: int, realizations: int, seed=0
) -> np.ndarray:
    """Stack of ``realizations`` independent paths, shape ``(realizations, n)``.

    Row ``r`` equals ``gen_wiener_alpha(spec, fs, n, child_seed(seed, r)).samples``.
    """
    fs = check_positive(fs, "fs")
    n = check_count(n, "n")
    realizations = check_count(realizations, "realizations")
    xi = np.stack([_normals(child_seed(seed, r), n - 1) for r in range(realizations)])
    return _wiener_from_normals(spec.c, 1.0 / fs, xi)


def _check_euler_gain(pll: PllSpec, fs: float) -> float:
    gain = pll.loop_rate / fs
    if gain >= 2.0:
        raise StabilityError(
            f"explicit Euler step unstable: 2*pi*f_pll/fs = {gain:.4g} >= 2; "
            f"fs must exceed pi*f_pll = {math.pi * pll.f_pll:.6g} Hz"
        )
    if gain > EULER_WARN_GAIN:
        warnings.warn(
            f"2*pi*f_pll/fs = {gain:.3g} > {EULER_WARN_GAIN}: Euler bias in the loop "
            f"variance is no longer negligible; use fs >= {pll.loop_rate / EULER_WARN_GAIN:.6g} Hz",
            RuntimeWarning,
            stacklevel=3,
        )
    return gain


def _pll_paths_euler(pll, dt, xi_vco, xi_ref):
    gain = pll.loop_rate * dt
    alpha_ref = _wiener_from_normals(pll.ref.c, dt, xi_ref)
    alpha_vco = _wiener_from_normals(pll.vco.c, dt, xi_vco)
    drive = np.zeros_like(alpha_vco)
    drive[..., 1:] = gain * alpha_ref[..., :-1] + np.diff(alpha_vco, axis=-1)
    alpha_pll = lfilter([1.0], [1.0, gain - 1.0], drive, axis=-1)
    return alpha_pll, alpha_ref, alpha_vco


def _exact_step_factors(lam: float, dt: float):
    # Joint law of (W(dt), int_0^dt exp(-lam (dt - s)) dW(s)) for one Wiener channel.
    x = lam * dt
    one_minus_rho = -math.expm1(-x)
    var_int = -math.expm1(-2.0 * x) / (2.0 * lam)
    cov = one_minus_rho / lam
    l11 = math.sqrt(dt)
    l21 = cov / l11
    l22 = math.sqrt(max(var_int - l21 * l21, 0.0))
    return 1.0 - one_minus_rho, l11, l21, l22


def _pll_paths_exact(pll, dt, z_vco, z_ref):
    rho, l11, l21, l22 = _exact_step_factors(pll.loop_rate, dt)
    dw_vco = l11 * z_vco[..., 0]
    dw_ref = l11 * z_ref[..., 0]
    i_vco = l21 * z_vco[..., 0] + l22 * z_vco[..., 1]
    i_ref = l21 * z_ref[..., 0] + l22 * z_ref[..., 1]
    lead = dw_vco.shape[:-1]
    n = dw_vco.shape[-1] + 1

    def walk(c, dw):
        out = np.zeros(lead + (n,))
        out[..., 1:] = math.sqrt(c) * np.cumsum(dw, axis=-1)
        return out

    alpha_ref = walk(pll.ref.c, dw_ref)
    alpha_vco = walk(pll.vco.c, dw_vco)
    drive = np.zeros(lead + (n,))
    drive[..., 1:] = math.sqrt(pll.vco.c) * i_vco - math.sqrt(pll.ref.c) * i_ref
    beta = lfilter([1.0], [1.0, -rho], drive, axis=-1)
    return beta + alpha_ref, alpha_ref, alpha_vco


def _draw_pll_noise(seed, n: int, scheme: str):
    shape = (n - 1,) if scheme == "euler" else (n - 1, 2)
    return _normals(child_seed(seed, 0), shape), _normals(child_seed(seed, 1), shape)


def _check_scheme(pll: PllSpec, fs: float, scheme: str) -> None:
    if scheme == "euler":
        _check_euler_gain(pll, fs)
    elif scheme != "exact":
        raise ValueError(f"scheme must be 'euler' or 'exact', got {scheme!r}")


def gen_pll_alpha(pll: PllSpec, fs: float, n: int, seed=0, scheme: str = "euler") -> PllPaths:
    """Time shift at the output of a first-order PLL, with the embedded REF and VCO paths.

    The default ``scheme="euler"`` advances

        alpha_pll[m] = alpha_pll[m-1] - g (alpha_pll[m-1] - alpha_ref[m-1])
                       + (alpha_vco[m] - alpha_vco[m-1]),   g = 2 pi f_pll / fs,

    which is the running-sum form of the loop equation.  It requires
    ``g < 2`` and warns above ``g = 0.1``.

    ``scheme="exact"`` samples the detector time shift ``beta`` from its
    exact Gaussian transition (jointly with the oscillator increments), so
    any ``fs`` may be used; it consumes two normals per step and noise
    channel, so its paths differ from the Euler ones for the same seed.

    Raises
    ------
    StabilityError
        If the Euler loop gain is ``>= 2``.
    """
    fs = check_positive(fs, "fs")
    n = check_count(n, "n")
    _check_scheme(pll, fs, scheme)
    dt = 1.0 / fs
    xi_vco, xi_ref = _draw_pll_noise(seed, n, scheme)
    paths = (_pll_paths_euler if scheme == "euler" else _pll_paths_exact)(pll, dt, xi_vco, xi_ref)
    label = _seed_label(seed)
    meta = {"scheme": scheme}
    return PllPaths(
        *(
            TimeShiftSeries(dt, p, kind=k, seed=label, meta=meta)
            for p, k in zip(paths, ("pll", "pll-ref", "pll-vco"))
        )
    )


def pll_alpha_ensemble(
    pll: PllSpec, fs: float, n: int, realizations: int, seed=0, scheme: str = "euler"
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(alpha_pll, alpha_ref, alpha_vco)``, each of shape ``(realizations, n)``.

    Row ``r`` equals :func:`gen_pll_alpha` with ``child_seed(seed, r)``.
    """
    fs = check_positive(fs, "fs")
    n = check_count(n, "n")
    realizations = check_count(realizations, "realizations")
    _check_scheme(pll, fs, scheme)
    draws = [_draw_pll_noise(child_seed(seed, r), n, scheme) for r in range(realizations)]
    xi_vco = np.stack([d[0] for d in draws])
    xi_ref = np.stack([d[1] for d in draws])
    fn = _pll_paths_euler if scheme == "euler" else _pll_paths_exact
    return fn(pll, 1.0 / fs, xi_vco, xi_ref)


def pll_alpha_cumulative(alpha_ref, alpha_vco, gain: float, vco_lag: int = 0) -> np.ndarray:
    """Direct O(n^2) evaluation of the loop as a cumulative sum.

    ``alpha_pll[m] = -gain * sum_{i<m}(alpha_pll[i] - alpha_ref[i]) + alpha_vco[m - vco_lag]``.
    ``vco_lag=0`` matches :func:`gen_pll_alpha`; ``vco_lag=1`` lags the VCO
    path by one sample.  Intended as a check on short paths.
    """
    alpha_ref = np.asarray(alpha_ref, dtype=float)
    alpha_vco = np.asarray(alpha_vco, dtype=float)
    if alpha_ref.shape != alpha_vco.shape or alpha_ref.ndim != 1:
        raise ValueError("alpha_ref and alpha_vco must be 1-D with equal length")
    if vco_lag not in (0, 1):
        raise ValueError("vco_lag must be 0 or 1")
    out = np.zeros_like(alpha_ref)
    for m in range(1, out.size):
        out[m] = -gain * np.sum(out[:m] - alpha_ref[:m]) + alpha_vco[m - vco_lag]
    return out


def integrate_linear_sde(
    system: SdeSystem,
    fs: float,
    n: int,
    seed=0,
    *,
    realizations: int | None = None,
    y0=None,
) -> SdePath:
    """Euler-Maruyama integration of ``dy = -A y dt + B dW`` from ``y0`` (default 0).

    ``y[m+1] = y[m] - A y[m] dt + B sqrt(dt) xi[m]``.  Returns states of shape
    ``(n, p)``, or ``(realizations, n, p)`` when ``realizations`` is given
    (realization ``r`` uses ``child_seed(seed, r)``).

    Raises
    ------
    StabilityError
        If the spectral radius of ``I - A dt`` is not below one.
    """
    fs = check_positive(fs, "fs")
    n = check_count(n, "n")
    dt = 1.0 / fs
    p, q = system.p, system.q
    step = np.eye(p) - system.a * dt
    radius = np.max(np.abs(np.linalg.eigvals(step)))
    if radius >= 1.0:
        raise StabilityError(
            f"Euler-Maruyama unstable: spectral radius of I - A*dt is {radius:.6g} >= 1"
        )
    single = realizations is None
    seeds = [seed] if single else [child_seed(seed, r) for r in range(check_count(realizations, "realizations"))]
    # (R, q, n-1): channel j of each realization from its own stream
    xi = np.stack([[_normals(child_seed(s, j), n - 1) for j in range(q)] for s in seeds])
    kicks = math.sqrt(dt) * np.einsum("pq,rqn->rnp", system.b, xi)
    y = np.zeros((len(seeds), n, p))
    if y0 is not None:
        y[:, 0, :] = np.broadcast_to(np.asarray(y0, dtype=float), (len(seeds), p))
    at = (system.a * dt).T
    for m in range(n - 1):
        y[:, m + 1, :] = y[:, m, :] - y[:, m, :] @ at + kicks[:, m, :]
    return SdePath(dt, y[0] if single else y, system.labels)


def alpha_to_baseband(series, f0: float) -> np.ndarray:
    """Unit-magnitude baseband samples ``exp(j 2 pi f0 alpha[n])`` (carrier removed)."""
    f0 = check_positive(f0, "f0")
    alpha = series.samples if isinstance(series, TimeShiftSeries) else np.asarray(series, float)
    return np.exp(1j * (2.0 * math.pi * f0) * alpha)
