"""Closed-form phase-noise mathematics for free-running oscillators and first-order PLLs.

All spectra are single-sideband levels in dBc/Hz, referenced to a 1 Hz
bandwidth and normalized to the power of the first carrier harmonic.  All
time-domain quantities (autocorrelations, variances) are of the stochastic
time shift ``alpha(t)`` and are in seconds squared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._validation import (
    as_frequency_array,
    check_finite_scalar,
    check_non_negative,
    check_positive,
)

__all__ = [
    "OscillatorSpec",
    "PllSpec",
    "SpectrumModelParams",
    "lorentzian_psd",
    "l_max",
    "f_3db",
    "vco_output_acf",
    "pll_acf",
    "pll_variance",
    "pll_series_weights",
    "pll_psd_series",
    "simplified_psd",
    "extended_psd",
    "transition_frequency",
    "transition_frequency_k2",
    "implied_vco_f3db",
]

_LOCK_RTOL = 1e-9


@dataclass(frozen=True)
class OscillatorSpec:
    """A free-running oscillator driven by white noise.

    Parameters
    ----------
    f0 : float
        Carrier frequency in Hz.
    c : float
        Oscillator constant in seconds; the time-shift variance grows as ``c * t``.
    k : int
        Roll-off exponent of the spectrum tail (2 for the white-noise theory).
    """

    f0: float
    c: float
    k: int = 2

    def __post_init__(self):
        object.__setattr__(self, "f0", check_positive(self.f0, "f0"))
        object.__setattr__(self, "c", check_non_negative(self.c, "c"))
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def f_3db(self) -> float:
        """Phase-noise bandwidth ``pi * f0**2 * c`` in Hz."""
        return math.pi * self.f0**2 * self.c


@dataclass(frozen=True)
class PllSpec:
    """A locked first-order PLL (no loop filter).

    ``f_pll`` is the loop bandwidth in Hz; the product of detector gain and
    VCO control sensitivity enters the model only through
    ``2 * pi * f_pll``.  ``m`` is the feedback divider ratio, so the
    reference runs at ``vco.f0 / m``.
    """

    ref: OscillatorSpec
    vco: OscillatorSpec
    f_pll: float
    m: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "f_pll", check_positive(self.f_pll, "f_pll"))
        m = check_finite_scalar(self.m, "m")
        if m < 1:
            raise ValueError(f"divider ratio m must be >= 1, got {m}")
        object.__setattr__(self, "m", m)
        if not math.isclose(self.ref.f0 * m, self.vco.f0, rel_tol=_LOCK_RTOL):
            raise ValueError(
                f"PLL not locked: ref.f0 * m = {self.ref.f0 * m!r} Hz differs from "
                f"vco.f0 = {self.vco.f0!r} Hz"
            )

    @classmethod
    def from_constants(
        cls, c_ref: float, c_vco: float, f_pll: float, f0: float = 1.0, m: float = 1.0
    ) -> "PllSpec":
        """Build a spec from oscillator constants; ``f0`` is the output carrier."""
        return cls(
            ref=OscillatorSpec(f0=f0 / m, c=c_ref),
            vco=OscillatorSpec(f0=f0, c=c_vco),
            f_pll=f_pll,
            m=m,
        )

    @property
    def loop_rate(self) -> float:
        """Decay rate of the detector time-shift process, ``2 pi f_pll`` in 1/s."""
        return 2.0 * math.pi * self.f_pll


@dataclass(frozen=True)
class SpectrumModelParams:
    """Parameters of the simplified PLL phase-noise spectrum.

    ``f_nf`` is optional; when ``None`` the model has no noise floor.
    """

    f_3db_ref: float
    f_tr: float
    f_pll: float
    f_nf: float | None = None
    k_ref: float = 3
    k_vco: float = 3

    def __post_init__(self):
        for name in ("f_3db_ref", "f_tr", "f_pll", "k_ref", "k_vco"):
            object.__setattr__(self, name, check_positive(getattr(self, name), name))
        if self.f_nf is not None:
            object.__setattr__(self, "f_nf", check_positive(self.f_nf, "f_nf"))
        if not self.f_3db_ref < self.f_tr < self.f_pll:
            raise ValueError(
                "expected f_3db_ref < f_tr < f_pll, got "
                f"{self.f_3db_ref!r}, {self.f_tr!r}, {self.f_pll!r}"
            )
        if self.f_nf is not None and not self.f_pll < self.f_nf:
            raise ValueError(f"expected f_pll < f_nf, got {self.f_pll!r}, {self.f_nf!r}")

    @property
    def plateau_level(self) -> float:
        """Low-offset level ``-10 log10(pi f_3db_ref)`` in dBc/Hz."""
        return -10.0 * math.log10(math.pi * self.f_3db_ref)

    @property
    def transition_level(self) -> float:
        """Asymptotic level of the flat transition interval in dBc/Hz."""
        return self.plateau_level + 10.0 * self.k_ref * math.log10(self.f_3db_ref / self.f_tr)

    @property
    def floor_level(self) -> float | None:
        """Asymptotic noise-floor level in dBc/Hz, or ``None`` without a floor."""
        if self.f_nf is None:
            return None
        return self.transition_level + 10.0 * self.k_vco * math.log10(self.f_pll / self.f_nf)


def _require_c(spec: OscillatorSpec) -> None:
    if spec.c == 0:
        raise ValueError("degenerate: ideal oscillator has Dirac PSD")


def lorentzian_psd(spec: OscillatorSpec, f_offs) -> np.ndarray | float:
    """Single-sideband phase noise of a free-running oscillator in dBc/Hz.

    Evaluates ``10 log10(f0^2 c / (f_offs^2 + pi^2 f0^4 c^2))``.  The result is
    even in ``f_offs`` and finite at zero offset.
    """
    _require_c(spec)
    f = np.asarray(f_offs, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("f_offs must be finite")
    f0, c = spec.f0, spec.c
    out = 10.0 * np.log10(f0**2 * c / (f**2 + (math.pi * f0**2 * c) ** 2))
    return out[()] if out.ndim == 0 else out


def l_max(spec: OscillatorSpec) -> float:
    """Peak level at zero offset, ``-10 log10(pi^2 f0^2 c)`` in dBc/Hz."""
    _require_c(spec)
    return -10.0 * math.log10(math.pi**2 * spec.f0**2 * spec.c)


def f_3db(spec: OscillatorSpec) -> float:
    """3 dB cut-off (phase-noise bandwidth) ``pi f0^2 c`` in Hz; 0 for an ideal oscillator."""
    return spec.f_3db


def vco_output_acf(spec: OscillatorSpec, tau) -> np.ndarray | float:
    """Envelope of the asymptotic output autocorrelation at the first harmonic.

    Returns ``exp(-0.5 (2 pi f0)^2 c |tau|)`` for unit carrier power.
    """
    tau = np.asarray(tau, dtype=float)
    out = np.exp(-0.5 * (2.0 * math.pi * spec.f0) ** 2 * spec.c * np.abs(tau))
    return out[()] if out.ndim == 0 else out


def pll_acf(pll: PllSpec, t, tau) -> np.ndarray | float:
    """Autocorrelation ``E[alpha_PLL(t) alpha_PLL(t + tau)]`` of the PLL output time shift.

    The process starts at a deterministic zero at ``t = 0``.  For negative
    ``tau`` the symmetric value ``R(t + tau, t)`` is returned, i.e. the
    closed form is evaluated at the earlier of the two instants with lag
    ``|tau|``.

    Raises
    ------
    ValueError
        If ``t < 0`` or ``t + tau < 0``.
    """
    t = np.asarray(t, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    if np.any(t + tau < 0):
        raise ValueError("t + tau must be >= 0")
    s = np.minimum(t, t + tau)
    d = np.abs(tau)
    lam = pll.loop_rate
    c_ref, c_vco = pll.ref.c, pll.vco.c
    nu = (c_vco + c_ref) / (2.0 * lam)
    mu = -c_ref / lam
    out = (
        nu * (np.exp(-lam * d) - np.exp(-lam * (2.0 * s + d)))
        + mu * (np.exp(-lam * d) - np.exp(-lam * (s + d)) + 1.0 - np.exp(-lam * s))
        + c_ref * s
    )
    return out[()] if out.ndim == 0 else out


def pll_variance(pll: PllSpec, t, mode: str = "exact") -> np.ndarray | float:
    """Variance of the PLL output time shift at time ``t``.

    ``mode="exact"`` is the autocorrelation at zero lag.  ``mode="approx"``
    lumps the cross terms into the stationary plateau,
    ``(c_vco - 3 c_ref) / (4 pi f_pll) (1 - exp(-4 pi f_pll t)) + c_ref t``.
    """
    if mode == "exact":
        return pll_acf(pll, t, 0.0)
    if mode != "approx":
        raise ValueError(f"mode must be 'exact' or 'approx', got {mode!r}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    lam = pll.loop_rate
    plateau = (pll.vco.c - 3.0 * pll.ref.c) / (2.0 * lam)
    out = plateau * (1.0 - np.exp(-2.0 * lam * t)) + pll.ref.c * t
    return out[()] if out.ndim == 0 else out


def pll_series_weights(pll: PllSpec, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Poisson weights and Lorentzian half-widths (Hz) of the PLL output spectrum.

    Terms are kept from the ``tol/2`` lower quantile up to the point where
    the upper tail holds at most ``tol/2``, never beyond ``10 * (rate + 10)``.
    The dropped mass is therefore at most ``tol`` and the term count grows
    like ``sqrt(rate)``.
    """
    tol = check_positive(tol, "tol")
    if tol > 1e-3:
        raise ValueError(f"tol must be in (0, 1e-3], got {tol}")
    c_ref, c_vco, f0 = pll.ref.c, pll.vco.c, pll.vco.f0
    if c_vco <= c_ref:
        raise ValueError(
            f"series weights undefined: requires c_vco > c_ref, got {c_vco!r} <= {c_ref!r}"
        )
    rate = math.pi * f0**2 * (c_vco - c_ref) / pll.f_pll
    cap = int(math.ceil(10.0 * (rate + 10.0)))
    # quantiles via cdf/sf, since a cumsum of many pmf terms drifts by ~n*eps
    lo = int(stats.poisson.ppf(tol / 2, rate))
    if lo > 0 and stats.poisson.cdf(lo - 1, rate) > tol / 2:
        lo -= 1
    hi = min(int(stats.poisson.isf(tol / 2, rate)), cap)
    while hi < cap and stats.poisson.sf(hi, rate) > tol / 2:
        hi += 1
    n = np.arange(lo, hi + 1)
    weights = stats.poisson.pmf(n, rate)
    # pmf loses ~rate*log(rate)*eps to cancellation; rescale to the exact kept mass
    kept = stats.poisson.cdf(hi, rate) - (stats.poisson.cdf(lo - 1, rate) if lo > 0 else 0.0)
    weights *= kept / weights.sum()
    halfwidths = math.pi * f0**2 * c_ref + n * pll.f_pll
    return weights, halfwidths


def pll_psd_series(pll: PllSpec, f_offs, tol: float = 1e-9) -> np.ndarray | float:
    """Single-sideband phase noise of the locked PLL output in dBc/Hz.

    A Poisson-weighted sum of unit-area Lorentzians centred on the carrier,
    evaluated at offsets ``f_offs`` (Hz).
    """
    weights, h = pll_series_weights(pll, tol)
    f = np.asarray(f_offs, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("f_offs must be finite")
    ff = f.reshape(-1, 1)
    lin = np.sum(weights * h / (math.pi * (h**2 + ff**2)), axis=1).reshape(f.shape)
    out = 10.0 * np.log10(lin)
    return out[()] if out.ndim == 0 else out


def _ratio_term(f: np.ndarray, fc: float, k: float) -> np.ndarray:
    return (f / fc) ** k


def simplified_psd(params: SpectrumModelParams, f) -> np.ndarray | float:
    """Simplified PLL spectrum (REF low-pass, flat transition, VCO roll-off) in dBc/Hz."""
    if params.f_nf is not None:
        raise ValueError("simplified_psd takes parameters without f_nf; use extended_psd")
    f = as_frequency_array(f)
    kr, kv = params.k_ref, params.k_vco
    lin = (
        (1.0 + _ratio_term(f, params.f_tr, kr))
        / (1.0 + _ratio_term(f, params.f_3db_ref, kr))
        / (1.0 + _ratio_term(f, params.f_pll, kv))
    )
    out = params.plateau_level + 10.0 * np.log10(lin)
    return out[()] if out.ndim == 0 else out


def extended_psd(params: SpectrumModelParams, f, *, printed_form: bool = False):
    """Simplified PLL spectrum with a flat noise floor above ``f_nf``, in dBc/Hz.

    With ``printed_form=True`` the two denominators use ``(f^2/f_c^2)^k``,
    which doubles the roll-off; the default uses ``(f/f_c)^k`` like
    :func:`simplified_psd`.
    """
    if params.f_nf is None:
        raise ValueError("extended_psd requires f_nf")
    f = as_frequency_array(f)
    kr, kv = params.k_ref, params.k_vco
    p = 2.0 if printed_form else 1.0
    lin = (
        (1.0 + _ratio_term(f, params.f_tr, kr))
        / (1.0 + _ratio_term(f, params.f_3db_ref, kr) ** p)
        * (1.0 + _ratio_term(f, params.f_nf, kv))
        / (1.0 + _ratio_term(f, params.f_pll, kv) ** p)
    )
    out = params.plateau_level + 10.0 * np.log10(lin)
    return out[()] if out.ndim == 0 else out


def transition_frequency(
    f_3db_ref: float,
    f_3db_vco: float,
    f_pll: float,
    k_ref: float = 2,
    k_vco: float = 2,
    *,
    printed_form: bool = False,
) -> float:
    """Start of the transition interval in Hz.

    Solves ``L_REF(f_tr) = L_VCO(f_pll)`` for the low-pass oscillator models
    ``1 / (pi f_3db (1 + (f / f_3db)^k))``:

        f_tr^k_ref = f_3db_ref^(k_ref-1) (f_3db_vco + f_pll^k_vco / f_3db_vco^(k_vco-1))
                     - f_3db_ref^k_ref

    ``printed_form=True`` evaluates
    ``(f_3db_vco^k_vco + f_pll^k_vco) / f_3db_vco * f_3db_ref - f_3db_ref^k_ref``
    instead, which agrees with the intersection only for ``k_ref = k_vco = 2``.
    """
    f_3db_ref = check_positive(f_3db_ref, "f_3db_ref")
    f_3db_vco = check_positive(f_3db_vco, "f_3db_vco")
    f_pll = check_positive(f_pll, "f_pll")
    k_ref = check_positive(k_ref, "k_ref")
    k_vco = check_positive(k_vco, "k_vco")
    if printed_form:
        radicand = (f_3db_vco**k_vco + f_pll**k_vco) / f_3db_vco * f_3db_ref - f_3db_ref**k_ref
    else:
        radicand = (
            f_3db_ref ** (k_ref - 1) * (f_3db_vco + f_pll**k_vco / f_3db_vco ** (k_vco - 1))
            - f_3db_ref**k_ref
        )
    if radicand < 0:
        raise ValueError("models do not intersect")
    return radicand ** (1.0 / k_ref)


def transition_frequency_k2(f_3db_ref: float, f_3db_vco: float, f_pll: float) -> float:
    """Closed form of :func:`transition_frequency` for ``k_ref = k_vco = 2``."""
    radicand = (f_3db_vco**2 + f_pll**2) / (f_3db_vco * f_3db_ref) - 1.0
    if radicand < 0:
        raise ValueError("models do not intersect")
    return f_3db_ref * math.sqrt(radicand)


def implied_vco_f3db(params: SpectrumModelParams) -> float:
    """VCO cut-off whose low-pass tail coincides with the model above ``f_pll``.

    Matching ``f3v^(k_vco-1) / (pi f^k_vco)`` with the transition plateau
    rolled off at ``f_pll`` gives
    ``f3v^(k_vco-1) = f_3db_ref^(k_ref-1) f_pll^k_vco / f_tr^k_ref``.
    """
    kr, kv = params.k_ref, params.k_vco
    if kv <= 1:
        raise ValueError("k_vco must be > 1 to define a VCO cut-off")
    log_f3v = (
        (kr - 1) * math.log(params.f_3db_ref)
        + kv * math.log(params.f_pll)
        - kr * math.log(params.f_tr)
    ) / (kv - 1)
    return math.exp(log_f3v)
