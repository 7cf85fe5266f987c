"""Chaos-weight field: normalization, pairings, moment fits, coupled L2
comparisons, and the pair-interaction integral oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsinhlab.cauchy_kernel import KernelConfig
from fracsinhlab.gmc import (
    CSV_COLUMNS,
    GmcSample,
    alpha_gamma,
    alternative_mollifier,
    explicit_normalization,
    gmc_weights,
    l2_cauchy,
    make_window_plan,
    moment_bound_exponent,
    moment_order_limit,
    moment_scaling,
    mollifier_independence,
    normalization_agreement,
    pair,
    pair_mean,
    partition_integral_mc,
    rows_to_csv,
    sample_half_spectrum,
    sample_window_field,
    wick_constant,
    _default_mollifier,
    _full_half_spectrum,
    _pooled_pairs,
    _window_from_half,
    _window_from_hat,
)
from fracsinhlab.noise_field import (
    GridField,
    covariance_analytic,
    _v_rows_from_noise,
)
from fracsinhlab.noise_field import TestFunction as Probe

G8 = math.sqrt(math.pi / 8.0)
G16 = math.sqrt(math.pi / 16.0)
BUMP = Probe.bump()
DELTAS = [1 / 4, 1 / 8, 1 / 16, 1 / 32]


@pytest.fixture(scope="module")
def cfg():
    return KernelConfig()


@pytest.fixture(scope="module")
def rho():
    return _default_mollifier()


@pytest.fixture(scope="module")
def small_plan(cfg, rho):
    # eps = 1/16 at dt = eps/8: the mollifier spans several cells, so the
    # lattice variance tracks the analytic one closely.
    return make_window_plan(cfg, rho, 1 / 16, 0.25, 1 / 128, 128)


class TestExponentArithmetic:
    def test_alpha_zero_gamma(self):
        assert alpha_gamma(0.0) == 0.0

    def test_alpha_reference_point(self):
        assert alpha_gamma(math.sqrt(math.pi / 14.0)) == pytest.approx(
            -0.3606, abs=2e-4
        )

    def test_alpha_large_coupling_branch(self):
        # at b = 1 the -3 branch is active
        assert alpha_gamma(math.sqrt(4.0 * math.pi)) == pytest.approx(-3.0)

    def test_alpha_negative_for_positive_coupling(self):
        for g in (0.1, 0.5, G16, G8, 1.0):
            assert alpha_gamma(g) < 0.0

    def test_bound_exponent_values(self):
        assert moment_bound_exponent(G8, 1) == 0.0
        assert moment_bound_exponent(G8, 2) == pytest.approx(-1 / 16, abs=1e-15)
        assert moment_bound_exponent(G8, 3) == pytest.approx(-3 / 16, abs=1e-15)

    def test_order_limit(self):
        assert moment_order_limit(0.0) == math.inf
        assert moment_order_limit(G8) == pytest.approx(64.0)
        assert moment_order_limit(math.sqrt(2.0 * math.pi)) == pytest.approx(4.0)


class TestNormalization:
    def test_wick_constant_value(self):
        assert wick_constant() == pytest.approx(1.4116436, abs=5e-6)

    def test_explicit_vs_wick_agreement(self, cfg):
        eps_list = [2**-4, 2**-5, 2**-6, 2**-7]
        ratios = normalization_agreement(cfg, G8, eps_list)
        errs = [abs(r - 1.0) for r in ratios]
        assert all(e < 1e-3 for e in errs)
        assert all(errs[k + 1] < errs[k] for k in range(2))
        assert errs[-1] < 1e-5

    def test_explicit_normalization_positive(self, cfg):
        val = explicit_normalization(cfg, G8, 1 / 32)
        assert 0.0 < val < 1.0


class TestWeights:
    def test_zero_gamma_weights_are_one(self, small_plan):
        v = sample_window_field(small_plan, 3, 0)
        x = gmc_weights(v, 0.0, small_plan.var0)
        assert isinstance(x, GmcSample)
        assert np.all(x.weights.values == 1.0)

    def test_weights_positive_and_on_window(self, small_plan):
        v = sample_window_field(small_plan, 3, 1)
        x = gmc_weights(v, G8, small_plan.var0, eps=1 / 16)
        assert np.all(x.weights.values > 0.0)
        assert np.all(np.isfinite(x.weights.values))
        assert x.weights.grid == small_plan.window
        assert x.gamma == G8

    def test_pointwise_mean_one_2000_seeds(self, small_plan):
        mid = small_plan.window.n_t // 2
        vals = np.empty(2000)
        for s in range(2000):
            v = sample_window_field(small_plan, 41, s)
            vals[s] = gmc_weights(v, G16, small_plan.var0).weights.values[mid, 17]
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - 1.0) <= 3.0 * se

    def test_overflowing_field_rejected(self, small_plan):
        bad = GridField(
            grid=small_plan.window,
            values=np.full((small_plan.window.n_t, 128), 1e6),
        )
        with pytest.raises(FloatingPointError):
            gmc_weights(bad, 2.0, 0.0)


class TestPair:
    def test_zero_gamma_pair_is_integral(self, small_plan):
        v = sample_window_field(small_plan, 5, 0)
        x = gmc_weights(v, 0.0, small_plan.var0)
        mass = BUMP.integral()
        # delta=1/4 leaves only 8 cells per direction, so the cell
        # quadrature is the accuracy floor there
        for delta, tol in ((1.0, 1e-7), (0.5, 1e-6), (0.25, 2e-5)):
            assert pair(x, BUMP, delta, (0.0, 0.0)) == pytest.approx(mass, abs=tol)

    def test_escape_raises(self, small_plan):
        v = sample_window_field(small_plan, 5, 1)
        x = gmc_weights(v, 0.0, small_plan.var0)
        with pytest.raises(ValueError):
            pair(x, BUMP, 1.0, (0.2, 0.0))

    @pytest.mark.parametrize("gamma", [G16, -G16, G8, -G8])
    def test_mean_one(self, gamma):
        est, se, target = pair_mean(gamma, BUMP, 1.0, 400, 21)
        assert abs(est - target) <= 3.0 * se
        assert target == pytest.approx(BUMP.integral(), abs=1e-7)

    def test_spread_monotone_in_coupling(self, small_plan):
        p16, p8 = np.empty(250), np.empty(250)
        for s in range(250):
            v = sample_window_field(small_plan, 77, s)
            p16[s] = _pooled_pairs(
                gmc_weights(v, G16, small_plan.var0), BUMP, 1.0, 4
            ).mean()
            p8[s] = _pooled_pairs(
                gmc_weights(v, G8, small_plan.var0), BUMP, 1.0, 4
            ).mean()
        assert p8.var(ddof=1) > p16.var(ddof=1)


class TestWindowSampler:
    def test_half_spectrum_matches_full_path(self, small_plan):
        rng = np.random.default_rng(42)
        half = _full_half_spectrum(small_plan.grid, small_plan.sigma, rng)
        n = small_plan.grid.n_x
        full = np.zeros((small_plan.grid.n_t, n), dtype=complex)
        full[:, : n // 2 + 1] = half
        full[:, n // 2 + 1 :] = np.conj(half[:, 1 : n // 2][:, ::-1])
        va = _window_from_hat(small_plan, full).values
        vb = _window_from_half(small_plan, half).values
        assert np.max(np.abs(va - vb)) < 1e-12

    def test_sampler_uses_sparse_spectrum(self, small_plan):
        va = sample_window_field(small_plan, 7, 3).values
        vb = _window_from_half(small_plan, sample_half_spectrum(small_plan, 7, 3)).values
        assert np.array_equal(va, vb)

    def test_window_matches_direct_convolution(self, small_plan):
        # dense reference: every window row contracted against the raw taps
        rng = np.random.default_rng(1234)
        xi = rng.normal(0.0, small_plan.sigma, size=(small_plan.grid.n_t, 128))
        xi_hat = np.fft.fft(xi, axis=1)
        fast = _window_from_hat(small_plan, xi_hat).values
        rows = range(small_plan.row_lo, small_plan.row_lo + small_plan.window.n_t)
        ref = _v_rows_from_noise(xi_hat, small_plan.taps, small_plan.m, rows)
        assert np.max(np.abs(fast - np.array(ref))) < 1e-12

    def test_determinism(self, small_plan):
        a = sample_window_field(small_plan, 11, 4).values
        b = sample_window_field(small_plan, 11, 4).values
        assert np.array_equal(a, b)

    def test_lattice_variance_near_analytic(self, small_plan, cfg):
        q0 = covariance_analytic(cfg, (0.0, 0.0), 1 / 16)
        assert abs(small_plan.var0 / q0 - 1.0) < 0.01

    def test_lattice_variance_empirical(self, small_plan):
        mid = small_plan.window.n_t // 2
        vals = np.array(
            [sample_window_field(small_plan, 99, s).values[mid, 0] for s in range(3000)]
        )
        assert abs(vals.var(ddof=1) / small_plan.var0 - 1.0) < 0.10


class TestMomentScaling:
    def test_rejects_non_integer_order(self):
        with pytest.raises(ValueError):
            moment_scaling(G8, 1.5, [1 / 4, 1 / 8], 10, 0, eps=1 / 64)
        with pytest.raises(ValueError):
            moment_scaling(G8, 0, [1 / 4, 1 / 8], 10, 0, eps=1 / 64)

    def test_rejects_order_beyond_moment_existence(self):
        # gamma = 3: moments exist only for p < 8 pi / 9 < 3
        with pytest.raises(ValueError):
            moment_scaling(3.0, 3, [1 / 4, 1 / 8], 10, 0, eps=1 / 64)

    def test_rejects_bad_delta_lists(self):
        with pytest.raises(ValueError):
            moment_scaling(G8, 2, [1 / 8, 1 / 4], 10, 0, eps=1 / 64)
        with pytest.raises(ValueError):
            moment_scaling(G8, 2, [1 / 2, 1 / 4], 10, 0, eps=1 / 64)
        with pytest.raises(ValueError):
            moment_scaling(G8, 2, [1 / 4, 1 / 32], 10, 0, eps=1 / 64)

    def test_zero_gamma_flat(self):
        fit = moment_scaling(0.0, 2, DELTAS, 3, 1)
        assert all(abs(m - 1.0) < 1e-4 for m in fit.moments)
        assert abs(fit.slope) < 1e-3

    def test_first_moment_flat(self):
        fit = moment_scaling(G8, 1, DELTAS, 300, 8)
        assert abs(fit.slope) <= fit.ci

    def test_second_moment_respects_bound(self):
        fit = moment_scaling(G8, 2, DELTAS, 400, 5)
        assert fit.slope >= moment_bound_exponent(G8, 2) - fit.ci

    def test_third_moment_respects_bound(self):
        fit = moment_scaling(G8, 3, DELTAS, 400, 9)
        assert fit.slope >= moment_bound_exponent(G8, 3) - fit.ci

    def test_sign_symmetry(self):
        fit_pos = moment_scaling(G16, 2, [1 / 4, 1 / 8], 300, 13, eps=1 / 64)
        fit_neg = moment_scaling(-G16, 2, [1 / 4, 1 / 8], 300, 13, eps=1 / 64)
        assert abs(fit_pos.slope - fit_neg.slope) <= fit_pos.ci + fit_neg.ci

    def test_determinism(self):
        fa = moment_scaling(G16, 2, [1 / 4, 1 / 8], 40, 3, eps=1 / 64)
        fb = moment_scaling(G16, 2, [1 / 4, 1 / 8], 40, 3, eps=1 / 64)
        assert fa.moments == fb.moments
        assert fa.slope == fb.slope and fa.ci == fb.ci

    def test_fit_metadata(self):
        fit = moment_scaling(G16, 2, [1 / 4, 1 / 8], 40, 3, eps=1 / 64)
        assert fit.p == 2 and fit.eps == 1 / 64 and fit.n_samples == 40
        assert len(fit.log_moments()) == 2


class TestCoupledComparisons:
    def test_equal_scales_vanish(self):
        est, se = l2_cauchy(G8, 1 / 8, 1 / 8, 1.0, BUMP, 3, 0)
        assert est == 0.0 and se == 0.0

    def test_reversed_scales_rejected(self):
        with pytest.raises(ValueError):
            l2_cauchy(G8, 1 / 16, 1 / 8, 1.0, BUMP, 3, 0)

    def test_cauchy_decreasing_and_positive_rate(self):
        eps_list = [1 / 8, 1 / 16, 1 / 32]
        ests = [l2_cauchy(G8, e, e / 2, 1.0, BUMP, 150, 31)[0] for e in eps_list]
        assert ests[0] > ests[1] > ests[2] > 0.0
        rate = (math.log(ests[0]) - math.log(ests[-1])) / (
            math.log(eps_list[0]) - math.log(eps_list[-1])
        )
        assert rate > 0.5

    def test_identical_mollifier_vanishes(self, rho):
        est, se = mollifier_independence(G8, 1 / 8, 1.0, BUMP, rho, rho, 3, 0)
        assert est == 0.0 and se == 0.0

    def test_zero_gamma_vanishes(self, rho):
        vth = alternative_mollifier(rho)
        est, _ = mollifier_independence(0.0, 1 / 8, 1.0, BUMP, rho, vth, 3, 0)
        assert est == pytest.approx(0.0, abs=1e-16)

    def test_mollifier_difference_shrinks(self, rho):
        vth = alternative_mollifier(rho)
        assert vth.s0 == pytest.approx(rho.s0 / 2.0)
        coarse, se_c = mollifier_independence(G8, 1 / 8, 1.0, BUMP, rho, vth, 150, 37)
        fine, se_f = mollifier_independence(G8, 1 / 32, 1.0, BUMP, rho, vth, 150, 37)
        assert fine + 3.0 * se_f < coarse - 3.0 * se_c


class TestPartitionIntegral:
    def test_out_of_regime_rejected(self):
        with pytest.raises(ValueError):
            partition_integral_mc(2.0, 1, 0.25, 10, 0)
        with pytest.raises(ValueError):
            partition_integral_mc(1.0, 4, 0.25, 10, 0)
        with pytest.raises(ValueError):
            partition_integral_mc(1.0, 0, 0.25, 10, 0)
        with pytest.raises(ValueError):
            partition_integral_mc(1.0, 2.5, 0.25, 10, 0)

    def test_single_point_is_ball_volume(self):
        pe = partition_integral_mc(1.0, 1, 0.25, 2000, 11)
        assert pe.estimate == pytest.approx(2 * 0.25**2, abs=1e-12)
        assert pe.stderr == 0.0
        assert pe.ess == pytest.approx(2000.0)

    def test_two_point_matches_quadrature(self):
        # a=1, p=2: reduce to the difference of two uniform diamond points;
        # in rotated coordinates E 1/max(|du|,|dv|) = 10/(3R) with R = 2r,
        # so Z = (2 r^2)^2 * 10 / (6 r) = 20 r^3 / 3.
        for r in (0.25, 0.125):
            pe = partition_integral_mc(1.0, 2, r, 20000, 12)
            assert abs(pe.estimate - 20.0 * r**3 / 3.0) <= 3.0 * pe.stderr
            assert pe.ess > 0.1 * 20000

    def test_doubling_consistency(self):
        pa = partition_integral_mc(1.0, 2, 0.25, 20000, 12)
        pb = partition_integral_mc(1.0, 2, 0.25, 40000, 12)
        assert abs(pa.estimate - pb.estimate) <= 3.0 * math.hypot(pa.stderr, pb.stderr)

    def test_determinism(self):
        pa = partition_integral_mc(1.5, 2, 0.2, 500, 4)
        pb = partition_integral_mc(1.5, 2, 0.2, 500, 4)
        assert pa == pb

    @given(
        r=st.floats(min_value=0.05, max_value=0.25),
        p=st.integers(min_value=1, max_value=3),
    )
    @settings(max_examples=25, deadline=None)
    def test_zero_exponent_gives_exact_volume_power(self, r, p):
        pe = partition_integral_mc(0.0, p, r, 50, 2)
        assert pe.estimate == pytest.approx((2 * r * r) ** p, rel=1e-12)
        assert pe.stderr == 0.0

    @given(a=st.floats(min_value=0.0, max_value=1.9))
    @settings(max_examples=20, deadline=None)
    def test_two_point_estimates_finite_positive(self, a):
        pe = partition_integral_mc(a, 2, 0.25, 200, 3)
        assert np.isfinite(pe.estimate) and pe.estimate > 0.0
        assert 0.0 < pe.ess <= 200.0


class TestCsvOutput:
    def test_header_and_shape(self):
        fit = moment_scaling(G16, 2, [1 / 4, 1 / 8], 40, 3, eps=1 / 64)
        text = fit.to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 3

    def test_values_round_trip(self):
        fit = moment_scaling(G16, 2, [1 / 4, 1 / 8], 40, 3, eps=1 / 64)
        lines = fit.to_csv().strip().split("\n")
        first = lines[1].split(",")
        assert float(first[0]) == fit.gamma
        assert int(first[1]) == 2
        assert float(first[2]) == 1 / 4
        assert float(first[4]) == fit.moments[0]
        assert int(first[6]) == 40

    def test_rows_to_csv_is_deterministic_text(self):
        rows = [(0.5, 2, 0.25, 0.015625, 1.0 / 3.0, 0.001, 10)]
        assert rows_to_csv(rows) == rows_to_csv(rows)
        body = rows_to_csv(rows).strip().split("\n")[1]
        assert body.split(",")[4] == "%.17g" % (1.0 / 3.0)
