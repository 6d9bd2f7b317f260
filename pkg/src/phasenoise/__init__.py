"""Phase-noise modelling, simulation, spectral estimation and fitting for oscillators and PLLs."""

from .estimators import PllPhaseNoiseModel
from .fit import (
    FitConfig,
    FitError,
    FitReport,
    SegmentSpec,
    classify_regions,
    estimate_c,
    estimate_corner,
    estimate_f3db,
    estimate_level,
    fit_pipeline,
    linear_regression_loglog,
    summarize_reports,
)
from .model import (
    OscillatorSpec,
    PllSpec,
    SpectrumModelParams,
    extended_psd,
    f_3db,
    implied_vco_f3db,
    l_max,
    lorentzian_psd,
    pll_acf,
    pll_psd_series,
    pll_series_weights,
    pll_variance,
    simplified_psd,
    transition_frequency,
    vco_output_acf,
)
from .spectral import PsdTrace, average_traces, integrated_power, log_resample, welch_psd
from .timegen import (
    PllPaths,
    SdeSystem,
    StabilityError,
    TimeShiftSeries,
    alpha_to_baseband,
    gen_pll_alpha,
    gen_wiener_alpha,
    integrate_linear_sde,
    pll_alpha_ensemble,
    wiener_alpha_ensemble,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
