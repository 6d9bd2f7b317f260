"""scikit-learn style wrapper around :func:`phasenoise.fit.fit_pipeline`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .fit import FitConfig, SegmentSpec, fit_pipeline
from .model import extended_psd
from .spectral import PsdTrace

__all__ = ["PllPhaseNoiseModel"]


def _frequencies(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"X must hold one column of offset frequencies, got {X.shape[1]}")
        X = X[:, 0]
    return X


class PllPhaseNoiseModel(RegressorMixin, BaseEstimator):
    """Fit the PLL phase-noise spectrum model to a measured trace.

    ``X`` holds offset frequencies in Hz (shape ``(n,)`` or ``(n, 1)``) and
    ``y`` the matching levels in dBc/Hz.  After :meth:`fit`, :meth:`predict`
    evaluates the fitted extended model.

    Parameters
    ----------
    f0 : float
        Carrier frequency in Hz, used to convert cut-offs to oscillator constants.
    k_ref, k_vco : float
        Roll-off exponents of the REF and VCO tails.
    segments : SegmentSpec or dict, optional
        Manual region bounds; automatic classification is used when ``None``.
    window_decades, slope_tol, plateau_tol, outlier_db :
        Passed to :class:`~phasenoise.fit.FitConfig`.

    Attributes
    ----------
    report_ : FitReport
    params_ : SpectrumModelParams
    """

    def __init__(
        self,
        f0=2e9,
        k_ref=3,
        k_vco=3,
        segments=None,
        window_decades=1.0 / 3.0,
        slope_tol=7.0,
        plateau_tol=7.0,
        outlier_db=10.0,
    ):
        self.f0 = f0
        self.k_ref = k_ref
        self.k_vco = k_vco
        self.segments = segments
        self.window_decades = window_decades
        self.slope_tol = slope_tol
        self.plateau_tol = plateau_tol
        self.outlier_db = outlier_db

    def _config(self) -> FitConfig:
        segments = self.segments
        if isinstance(segments, dict):
            segments = SegmentSpec(**segments)
        return FitConfig(
            k_ref=self.k_ref,
            k_vco=self.k_vco,
            window_decades=self.window_decades,
            slope_tol=self.slope_tol,
            plateau_tol=self.plateau_tol,
            segments=segments,
            outlier_db=self.outlier_db,
        )

    def fit(self, X, y):
        f = _frequencies(X)
        y = column_or_1d(check_array(y, ensure_2d=False, dtype=float), warn=True)
        if f.shape != y.shape:
            raise ValueError(f"X and y lengths differ: {f.size} vs {y.size}")
        order = np.argsort(f)
        trace = PsdTrace(f[order], y[order])
        self.report_ = fit_pipeline(trace, self.f0, self._config())
        self.params_ = self.report_.params
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "report_")
        return np.asarray(extended_psd(self.params_, _frequencies(X)), dtype=float)
