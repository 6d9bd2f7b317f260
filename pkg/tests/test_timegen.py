import math
import warnings

import numpy as np
import pytest
from scipy import stats

from phasenoise.model import OscillatorSpec, PllSpec, pll_acf, pll_variance
from phasenoise.timegen import (
    SdeSystem,
    StabilityError,
    TimeShiftSeries,
    alpha_to_baseband,
    child_seed,
    gen_pll_alpha,
    gen_wiener_alpha,
    integrate_linear_sde,
    pll_alpha_cumulative,
    pll_alpha_ensemble,
    wiener_alpha_ensemble,
)

VCO = OscillatorSpec(500e3, 1e-11)
FIG6 = PllSpec.from_constants(1e-16, 1e-14, 1e5 / (2 * math.pi))


class TestWiener:
    def test_starts_at_zero_and_is_read_only(self):
        s = gen_wiener_alpha(VCO, 1e8, 100, seed=1)
        assert s.samples[0] == 0.0
        assert len(s) == 100
        with pytest.raises(ValueError):
            s.samples[3] = 1.0

    def test_ideal_oscillator_is_zero(self):
        s = gen_wiener_alpha(OscillatorSpec(1e6, 0.0), 1e6, 50, seed=3)
        assert np.all(s.samples == 0)

    def test_deterministic(self):
        a = gen_wiener_alpha(VCO, 1e8, 1000, seed=42)
        b = gen_wiener_alpha(VCO, 1e8, 1000, seed=42)
        c = gen_wiener_alpha(VCO, 1e8, 1000, seed=43)
        assert a.samples.tobytes() == b.samples.tobytes()
        assert not np.array_equal(a.samples, c.samples)

    def test_single_sample(self):
        assert gen_wiener_alpha(VCO, 1e8, 1, seed=0).samples.tolist() == [0.0]

    def test_ensemble_rows_match_single_paths(self):
        block = wiener_alpha_ensemble(VCO, 1e8, 64, 3, seed=11)
        for r in range(3):
            single = gen_wiener_alpha(VCO, 1e8, 64, seed=child_seed(11, r))
            np.testing.assert_array_equal(block[r], single.samples)

    def test_child_seed_does_not_mutate(self):
        ss = np.random.SeedSequence(5)
        before = ss.n_children_spawned
        child_seed(ss, 0)
        child_seed(ss, 1)
        assert ss.n_children_spawned == before
        assert child_seed(5, 2).spawn_key == (2,)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            gen_wiener_alpha(VCO, 0.0, 10)
        with pytest.raises(ValueError):
            gen_wiener_alpha(VCO, 1e6, 0)
        with pytest.raises(ValueError):
            gen_wiener_alpha(VCO, 1e6, 10, seed=-1)
        with pytest.raises(TypeError):
            gen_wiener_alpha(VCO, 1e6, 10, seed=1.5)

    def test_variance_grows_linearly(self):
        fs, n, realizations = 1e8, 2001, 4000
        block = wiener_alpha_ensemble(VCO, fs, n, realizations, seed=8)
        band = 3 * math.sqrt(2 / realizations)
        for index in (10, 200, 2000):
            ratio = np.mean(block[:, index] ** 2) / (VCO.c * index / fs)
            assert abs(ratio - 1) <= band

    def test_increments_uncorrelated(self):
        alpha = gen_wiener_alpha(VCO, 1e8, 400_001, seed=21).samples
        inc = np.diff(alpha)
        first, second = inc[0::2], inc[1::2]
        pairs = first.size
        r = np.corrcoef(first, second)[0, 1]
        assert abs(r) <= 3 / math.sqrt(pairs)

    def test_gaussian_marginals(self):
        n, realizations = 11, 100_000
        block = wiener_alpha_ensemble(VCO, 1e8, n, realizations, seed=33)
        z = block[:, -1] / math.sqrt(VCO.c * (n - 1) / 1e8)
        assert abs(stats.skew(z)) < 0.05
        assert abs(stats.kurtosis(z)) < 0.1


class TestPll:
    def test_noiseless_loop_is_zero(self):
        pll = PllSpec.from_constants(0.0, 0.0, 1e4)
        paths = gen_pll_alpha(pll, 1e6, 100, seed=0)
        assert np.all(paths.pll.samples == 0)

    def test_returns_embedded_paths(self):
        paths = gen_pll_alpha(FIG6, 1e7, 500, seed=4)
        assert paths.pll.samples[0] == paths.ref.samples[0] == paths.vco.samples[0] == 0.0
        assert paths.pll.kind == "pll"
        # stream rule: VCO noise from stream 0, REF noise from stream 1
        vco = gen_wiener_alpha(OscillatorSpec(1.0, FIG6.vco.c), 1e7, 500, seed=child_seed(4, 0))
        ref = gen_wiener_alpha(OscillatorSpec(1.0, FIG6.ref.c), 1e7, 500, seed=child_seed(4, 1))
        np.testing.assert_array_equal(paths.vco.samples, vco.samples)
        np.testing.assert_array_equal(paths.ref.samples, ref.samples)

    def test_stability_limits(self):
        pll = PllSpec.from_constants(1e-16, 1e-14, 1e6)
        with pytest.raises(StabilityError, match="fs must exceed"):
            gen_pll_alpha(pll, 2 * math.pi * 1e6 / 2, 10)
        with pytest.warns(RuntimeWarning):
            gen_pll_alpha(pll, 2 * math.pi * 1e6 / 0.5, 10)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            gen_pll_alpha(pll, 2 * math.pi * 1e6 / 0.05, 10)
            gen_pll_alpha(pll, 1e3, 10, scheme="exact")
        with pytest.raises(ValueError):
            gen_pll_alpha(pll, 1e9, 10, scheme="midpoint")

    def test_incremental_equals_cumulative_form(self):
        paths = gen_pll_alpha(FIG6, 1e7, 4096, seed=12)
        gain = FIG6.loop_rate / 1e7
        literal = pll_alpha_cumulative(paths.ref.samples, paths.vco.samples, gain)
        scale = np.max(np.abs(paths.pll.samples))
        np.testing.assert_allclose(paths.pll.samples, literal, rtol=0, atol=1e-12 * scale)

    def test_lagged_vco_reading_differs(self):
        paths = gen_pll_alpha(FIG6, 1e7, 256, seed=12)
        gain = FIG6.loop_rate / 1e7
        lagged = pll_alpha_cumulative(paths.ref.samples, paths.vco.samples, gain, vco_lag=1)
        scale = np.max(np.abs(paths.pll.samples))
        assert np.max(np.abs(lagged - paths.pll.samples)) > 0.01 * scale

    def test_stationary_variance_without_reference(self):
        pll = PllSpec.from_constants(0.0, 1e-14, 1e4)
        fs = 2e6
        n = int(20 / pll.loop_rate * fs)
        alpha, _, _ = pll_alpha_ensemble(pll, fs, n, 600, seed=70)
        var = np.mean(alpha[:, -1] ** 2)
        assert var == pytest.approx(1e-14 / (4 * math.pi * 1e4), rel=0.10, abs=0)

    def test_variance_matches_closed_form_at_1ms(self):
        # plateau plus the reference random walk, c_ref * t
        fs, t = 4e6, 1e-3
        alpha, _, _ = pll_alpha_ensemble(FIG6, fs, int(t * fs) + 1, 1000, seed=71)
        var = np.mean(alpha[:, -1] ** 2)
        assert var == pytest.approx(pll_variance(FIG6, t), rel=0.10, abs=0)
        plateau = var - FIG6.ref.c * t
        assert plateau == pytest.approx(4.85e-20, rel=0.15, abs=0)

    @pytest.mark.parametrize("fs", [1e4, 1e6])
    def test_exact_scheme_matches_variance(self, fs):
        times = np.array([1e-4, 1e-3, 1e-2])
        n = int(times[-1] * fs) + 1
        alpha, _, _ = pll_alpha_ensemble(FIG6, fs, n, 4000, seed=72, scheme="exact")
        band = 3 * math.sqrt(2 / 4000)
        for t in times:
            var = np.mean(alpha[:, int(round(t * fs))] ** 2)
            assert abs(var / pll_variance(FIG6, t) - 1) <= band

    def test_exact_scheme_covariance(self):
        fs, t, tau = 1e5, 2e-3, 3e-5
        alpha, _, _ = pll_alpha_ensemble(FIG6, fs, int((t + tau) * fs) + 1, 20_000, seed=73, scheme="exact")
        prod = alpha[:, int(round(t * fs))] * alpha[:, int(round((t + tau) * fs))]
        se = prod.std(ddof=1) / math.sqrt(prod.size)
        assert abs(prod.mean() - pll_acf(FIG6, t, tau)) <= 3 * se


class TestSde:
    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            SdeSystem(np.eye(2), np.ones((3, 1)))
        with pytest.raises(ValueError):
            SdeSystem(np.ones((2, 3)), np.ones((2, 1)))
        sys1 = SdeSystem.first_order_pll(FIG6)
        assert sys1.p == 1 and sys1.q == 2

    def test_no_noise_stays_at_zero(self):
        system = SdeSystem(np.array([[3.0]]), np.zeros((1, 2)))
        path = integrate_linear_sde(system, 100.0, 50, seed=1)
        assert np.all(path.states == 0)

    def test_decays_from_initial_state(self):
        system = SdeSystem(np.array([[10.0]]), np.zeros((1, 1)))
        path = integrate_linear_sde(system, 1000.0, 11, y0=[1.0])
        np.testing.assert_allclose(path.states[:, 0], 0.99 ** np.arange(11), rtol=1e-12)

    def test_instability(self):
        system = SdeSystem(np.array([[3000.0]]), np.ones((1, 1)))
        with pytest.raises(StabilityError):
            integrate_linear_sde(system, 1000.0, 10)

    def test_pathwise_equal_to_pll_generator(self):
        fs, n, seed = 1e7, 3000, 99
        path = integrate_linear_sde(SdeSystem.first_order_pll(FIG6), fs, n, seed=seed)
        paths = gen_pll_alpha(FIG6, fs, n, seed=seed)
        beta = paths.pll.samples - paths.ref.samples
        scale = np.max(np.abs(beta))
        np.testing.assert_allclose(path.states[:, 0], beta, rtol=0, atol=1e-12 * scale)

    def test_realizations_shape_and_rows(self):
        system = SdeSystem(np.diag([1.0, 2.0]), np.eye(2))
        block = integrate_linear_sde(system, 100.0, 20, seed=5, realizations=3)
        assert block.states.shape == (3, 20, 2)
        single = integrate_linear_sde(system, 100.0, 20, seed=child_seed(5, 1))
        np.testing.assert_array_equal(block.states[1], single.states)


class TestBaseband:
    def test_zero_path_is_carrier(self):
        x = alpha_to_baseband(np.zeros(8), 1e6)
        np.testing.assert_array_equal(x, np.ones(8, dtype=complex))

    def test_unit_magnitude(self):
        s = gen_wiener_alpha(VCO, 1e8, 1000, seed=2)
        np.testing.assert_allclose(np.abs(alpha_to_baseband(s, VCO.f0)), 1.0, rtol=1e-15)

    def test_ramp_is_phase_ramp(self):
        dt, delta, f0 = 1e-6, 1e-3, 1e6
        n = np.arange(64)
        series = TimeShiftSeries(dt, n * dt * delta)
        x = alpha_to_baseband(series, f0)
        np.testing.assert_allclose(np.unwrap(np.angle(x)), 2 * math.pi * f0 * delta * n * dt, atol=1e-12)
