"""Tests for the wavelet basis, coefficient analysis, norm estimators,
and the partition-of-unity families."""

import math

import numpy as np
import pytest

from fracsinhlab.besov_wavelet import (
    CoefficientTable,
    DyadicPartition,
    SpatialBump,
    analyze,
    besov_norm_scan,
    besov_norm_wavelet,
    build_basis,
    dyadic_partition_eval,
    dyadic_partition_sum,
    probe_set,
    profile_slope,
    spatial_bump_eval,
    spatial_bump_torus_sum,
    synthesize,
)
from fracsinhlab.noise_field import (
    GridField,
    Mollifier,
    SpaceTimeGrid,
    mollify_noise,
    sample_white_noise,
)

BASIS = build_basis(3)


def white_field(grid, seed):
    return GridField(grid=grid, values=sample_white_noise(grid, seed).values)


@pytest.fixture(scope="module")
def noise_table():
    grid = SpaceTimeGrid.from_step(-3.0, 3.0, 2.0**-8, 256)
    return analyze(white_field(grid, [301, 0]), BASIS, 2.0, n_max=5)


@pytest.fixture(scope="module")
def scan_grid():
    return SpaceTimeGrid.from_step(-1.0, 1.0, 2.0**-8, 256)


@pytest.fixture(scope="module")
def smooth(scan_grid):
    tt = scan_grid.times()[:, None]
    xx = scan_grid.torus.points()[None, :]
    return GridField(
        grid=scan_grid,
        values=np.sin(2 * np.pi * xx) * np.cos(2 * np.pi * tt) * np.ones_like(tt),
    )


class TestBasis:
    def test_unsupported_v(self):
        with pytest.raises(ValueError):
            build_basis(7)
        with pytest.raises(ValueError):
            build_basis(1)

    def test_base_level_must_fit(self):
        with pytest.raises(ValueError):
            build_basis(3, level_base=2)

    def test_cached(self):
        assert build_basis(3) is BASIS

    def test_filter_qmf(self):
        a = BASIS.filter
        assert abs(a.sum() - 2.0) < 1e-12
        for m in range(1, 3):
            assert abs(np.dot(a[: len(a) - 2 * m], a[2 * m :])) < 1e-12

    def test_known_integer_value(self):
        # scaling function value at 1 for the 3-moment filter
        assert BASIS.phi(1.0) == pytest.approx(1.28634, abs=1e-4)

    def test_gram_offdiagonals(self):
        h = 2.0**-BASIS.resolution
        phi = BASIS.phi_table
        for k in range(1, 5):
            sh = k * 2**BASIS.resolution
            g = np.sum(phi[: len(phi) - sh] * phi[sh:]) * h
            assert abs(g) < 1e-6
        assert np.sum(phi * phi) * h == pytest.approx(1.0, abs=1e-6)

    def test_vanishing_moments(self):
        h = 2.0**-BASIS.resolution
        x = np.arange(len(BASIS.psi_table)) * h
        assert abs(np.sum(BASIS.psi_table) * h) < 1e-6
        assert abs(np.sum(BASIS.psi_table * x) * h) < 1e-6

    def test_refinement_residual_at_dyadics(self):
        # the stored table must satisfy its own two-scale relation
        phi = BASIS.phi_table
        a = BASIS.filter
        full = 2**BASIS.resolution
        worst = 0.0
        for i in range(0, len(phi), full // 4):
            s = 0.0
            for m in range(len(a)):
                src = 2 * i - m * full
                if 0 <= src < len(phi):
                    s += a[m] * phi[src]
            worst = max(worst, abs(phi[i] - s))
        assert worst < 1e-8

    def test_phi_psi_orthogonal(self):
        h = 2.0**-BASIS.resolution
        phi, psi = BASIS.phi_table, BASIS.psi_table
        for k in range(-4, 5):
            sh = abs(k) * 2**BASIS.resolution
            a, b = (phi, psi) if k >= 0 else (psi, phi)
            g = np.sum(a[: len(a) - sh] * b[sh:]) * h
            assert abs(g) < 1e-6

    def test_outside_support_zero(self):
        assert BASIS.phi(-0.5) == 0.0
        assert BASIS.phi(5.5) == 0.0
        assert BASIS.psi(6.0) == 0.0


class TestAnalyze:
    def test_under_resolved_level_raises(self):
        grid = SpaceTimeGrid.from_step(-1.0, 1.0, 1.0 / 256.0, 256)
        with pytest.raises(ValueError):
            analyze(white_field(grid, 0), BASIS, 1.0, n_max=8)

    def test_constant_field_kills_psi_coefficients(self):
        grid = SpaceTimeGrid.from_step(-1.0, 1.0, 1.0 / 256.0, 256)
        ones = GridField(grid=grid, values=np.ones((grid.n_t, grid.n_x)))
        table = analyze(ones, BASIS, 1.0)
        worst = max(
            np.max(np.abs(table.entries[(i, n)]["coeff"]))
            for (i, n) in table.entries
            if i >= 1
        )
        assert worst < 1e-12

    def test_orthonormality_of_analysis(self):
        # synthesize one basis function on a fine grid and re-analyze
        grid = SpaceTimeGrid.from_step(-0.7, 0.8, 2.0**-12, 4096)
        n, p, m = 3, -2, 3
        tab = CoefficientTable(
            basis=BASIS,
            t1=1.0,
            levels=[n],
            entries={(2, n): {"p": np.array([p]), "m": np.array([m]), "coeff": np.array([[1.0]])}},
            dt=grid.dt,
            dx=grid.dx,
        )
        out = analyze(synthesize(tab, grid), BASIS, 1.0, n_max=3)
        e = out.entries[(2, n)]
        ip = int(np.where(e["p"] == p)[0][0])
        im = int(np.where(e["m"] == m)[0][0])
        assert e["coeff"][ip, im] == pytest.approx(1.0, abs=1e-5)
        rest = e["coeff"].copy()
        rest[ip, im] = 0.0
        worst = max(
            np.max(np.abs(out.entries[(i, n)]["coeff"])) if i != 2 else np.max(np.abs(rest))
            for i in range(4)
        )
        assert worst < 1e-6

    def test_white_noise_level_variance_flat(self):
        grid = SpaceTimeGrid.from_step(-1.0, 1.0, 2.0**-9, 512)
        table = analyze(white_field(grid, 7), BASIS, 1.0, n_max=6)
        per_level = {n: float(np.mean(table.level_values(n) ** 2)) for n in table.levels}
        for v in per_level.values():
            assert 0.8 <= v <= 1.25
        ratio = max(per_level.values()) / min(per_level.values())
        assert 0.8 <= ratio <= 1.25

    def test_csv_output(self):
        grid = SpaceTimeGrid.from_step(-0.5, 0.5, 1.0 / 128.0, 128)
        table = analyze(white_field(grid, 3), BASIS, 1.0, n_max=4)
        text = table.to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == "iota,n,p,m,coeff"
        count = sum(e["coeff"].size for e in table.entries.values())
        assert len(lines) == count + 1
        iota, n, p, m, c = lines[1].split(",")
        float(c)
        assert int(n) in table.levels


class TestNormWavelet:
    def test_alpha_sign_checked(self, noise_table):
        with pytest.raises(ValueError):
            besov_norm_wavelet(noise_table, 0.5)

    def test_inadmissible_regularity_raises(self, noise_table):
        # the 3-moment basis has Holder exponent about 1.09
        with pytest.raises(ValueError):
            besov_norm_wavelet(noise_table, -1.1)

    def test_zero_field(self):
        grid = SpaceTimeGrid.from_step(-1.0, 1.0, 1.0 / 256.0, 256)
        zero = GridField(grid=grid, values=np.zeros((grid.n_t, grid.n_x)))
        est = besov_norm_wavelet(analyze(zero, BASIS, 1.0), -0.5)
        assert est.value == 0.0

    def test_homogeneity(self):
        grid = SpaceTimeGrid.from_step(-1.0, 1.0, 1.0 / 256.0, 256)
        f = white_field(grid, 11)
        double = GridField(grid=grid, values=2.0 * f.values)
        a = besov_norm_wavelet(analyze(f, BASIS, 1.0), -0.5)
        b = besov_norm_wavelet(analyze(double, BASIS, 1.0), -0.5)
        assert b.value == pytest.approx(2.0 * a.value, rel=1e-12)

    def test_value_is_profile_max(self, noise_table):
        est = besov_norm_wavelet(noise_table, -0.9)
        assert est.value == max(est.profile.values())

    def test_window_restriction_monotone(self, noise_table):
        full = besov_norm_wavelet(noise_table, -0.9, window=(-2.5, 2.5))
        sub = besov_norm_wavelet(noise_table, -0.9, window=(-1.0, 1.0))
        assert sub.value <= full.value

    def test_white_noise_slope_above_threshold(self, noise_table):
        est = besov_norm_wavelet(noise_table, -0.9)
        slope = profile_slope(est.rms_profile)
        assert 0.05 <= slope <= 0.15

    def test_smooth_field_profile_decays_geometrically(self):
        grid = SpaceTimeGrid.from_step(-1.0, 1.0, 1.0 / 256.0, 256)
        tt = grid.times()[:, None]
        xx = grid.torus.points()[None, :]
        smooth = GridField(
            grid=grid, values=np.sin(2 * np.pi * xx) * np.cos(2 * np.pi * tt) * np.ones_like(tt)
        )
        table = analyze(smooth, BASIS, 1.0, n_max=6)
        for alpha in (-0.3, -0.5, -0.9):
            est = besov_norm_wavelet(table, alpha)
            prof = [est.profile[n] for n in sorted(est.profile)]
            ratios = [prof[i + 1] / prof[i] for i in range(len(prof) - 1)]
            assert all(r < 0.9 for r in ratios)
            assert all(r == pytest.approx(2.0**alpha, abs=0.05) for r in ratios)


class TestThresholdInvariant:
    def test_majority_vote_at_both_sides_of_threshold(self):
        # the finer basis is needed: alpha = -1.1 exceeds the 3-moment
        # basis regularity
        basis4 = build_basis(4)
        grid = SpaceTimeGrid.from_step(-3.0, 3.0, 2.0**-8, 256)
        pos_votes = neg_votes = 0
        for seed in range(20):
            table = analyze(white_field(grid, [101, seed]), basis4, 2.0, n_max=5)
            if profile_slope(besov_norm_wavelet(table, -0.9).rms_profile) > 0:
                pos_votes += 1
            if profile_slope(besov_norm_wavelet(table, -1.1).rms_profile) < 0:
                neg_votes += 1
        assert pos_votes >= 18
        assert neg_votes >= 18


class TestNormScan:
    def test_validation(self, smooth):
        with pytest.raises(ValueError):
            besov_norm_scan(smooth, 0.5, (-0.5, 0.5))
        with pytest.raises(ValueError):
            besov_norm_scan(smooth, -0.5, (-0.5, 0.5), probes=[])
        with pytest.raises(ValueError):
            besov_norm_scan(smooth, -0.5, (-0.5, 0.5), j_max=9)

    def test_zero_field(self, scan_grid):
        zero = GridField(grid=scan_grid, values=np.zeros((scan_grid.n_t, scan_grid.n_x)))
        assert besov_norm_scan(zero, -0.5, (-0.75, 0.75)).value == 0.0

    def test_probe_norms_certified(self):
        probes = probe_set(1)
        assert len(probes) == 4
        for g in probes:
            assert g.c_m_norm <= 1.0

    def test_smooth_field_dominated_by_coarsest_scale(self, smooth):
        est = besov_norm_scan(smooth, -0.5, (-0.75, 0.75))
        assert np.isfinite(est.value)
        coarsest = min(est.profile)
        assert est.profile[coarsest] == est.value

    def test_homogeneity(self, smooth):
        double = GridField(grid=smooth.grid, values=2.0 * smooth.values)
        a = besov_norm_scan(smooth, -0.5, (-0.75, 0.75))
        b = besov_norm_scan(double, -0.5, (-0.75, 0.75))
        assert b.value == pytest.approx(2.0 * a.value, rel=1e-12)

    def test_window_restriction_monotone(self, scan_grid):
        f = white_field(scan_grid, 1)
        wide = besov_norm_scan(f, -0.5, (-0.75, 0.75))
        narrow = besov_norm_scan(f, -0.5, (-0.25, 0.25))
        assert narrow.value <= wide.value

    def test_scan_bounded_by_wavelet_estimate(self, scan_grid, smooth):
        # equivalence constant fitted once on this corpus, then frozen
        frozen_c = 0.0035
        fields = [white_field(scan_grid, s) for s in (1, 2, 3, 4)]
        fields.append(mollify_noise(sample_white_noise(scan_grid, 55), Mollifier(), 1.0 / 8.0))
        fields.append(smooth)
        rng_fields = []
        for alpha0, seed in ((-0.3, 31), (-0.5, 32), (-0.8, 33)):
            rng = np.random.default_rng(seed)
            entries = {}
            for n in range(3, 7):
                p_lo = int(np.ceil(scan_grid.t_min * 2**n))
                p_hi = int(np.floor(scan_grid.t_max * 2**n)) - BASIS.support_width
                p = np.arange(p_lo, p_hi + 1)
                mm = np.arange(2**n)
                signs = rng.choice([-1.0, 1.0], size=(len(p), len(mm)))
                entries[(3, n)] = {
                    "p": p,
                    "m": mm,
                    "coeff": signs * 2.0 ** (-n * (1 + alpha0)),
                }
            tab = CoefficientTable(
                basis=BASIS, t1=1.0, levels=list(range(3, 7)), entries=entries,
                dt=scan_grid.dt, dx=scan_grid.dx,
            )
            rng_fields.append(synthesize(tab, scan_grid))
        fields.extend(rng_fields)
        single = CoefficientTable(
            basis=BASIS, t1=1.0, levels=[4],
            entries={(3, 4): {"p": np.array([-3]), "m": np.array([5]), "coeff": np.array([[1.0]])}},
            dt=scan_grid.dt, dx=scan_grid.dx,
        )
        fields.append(synthesize(single, scan_grid))
        assert len(fields) == 10
        window = (-0.75, 0.75)
        for f in fields:
            scan = besov_norm_scan(f, -0.5, window).value
            wavelet = besov_norm_wavelet(
                analyze(f, BASIS, 1.0, n_max=6), -0.5, window=window
            ).value
            assert scan <= frozen_c * wavelet


class TestSyntheticScalingFields:
    @pytest.mark.parametrize("alpha0", [-0.3, -0.6])
    def test_profile_flat_at_matching_alpha(self, alpha0):
        grid = SpaceTimeGrid.from_step(-1.0, 1.0, 1.0 / 256.0, 256)
        rng = np.random.default_rng(77)
        entries = {}
        for n in range(3, 7):
            p_lo = int(np.ceil(grid.t_min * 2**n))
            p_hi = int(np.floor(grid.t_max * 2**n)) - BASIS.support_width
            p = np.arange(p_lo, p_hi + 1)
            mm = np.arange(2**n)
            signs = rng.choice([-1.0, 1.0], size=(len(p), len(mm)))
            entries[(3, n)] = {"p": p, "m": mm, "coeff": signs * 2.0 ** (-n * (1 + alpha0))}
        tab = CoefficientTable(
            basis=BASIS, t1=1.0, levels=list(range(3, 7)), entries=entries,
            dt=grid.dt, dx=grid.dx,
        )
        est = besov_norm_wavelet(tab, alpha0)
        prof = [est.profile[n] for n in sorted(est.profile)]
        for v in prof:
            assert v == pytest.approx(prof[0], rel=1e-12)


class TestPartitions:
    PART = DyadicPartition()
    BUMP = SpatialBump()

    def test_dyadic_sum_at_pinned_point(self):
        assert abs(dyadic_partition_sum(self.PART, np.array([0.013]))[0] - 1.0) < 1e-10

    def test_dyadic_sum_on_log_grid(self):
        rs = np.geomspace(1e-8, 10.0, 400)
        assert np.max(np.abs(dyadic_partition_sum(self.PART, rs) - 1.0)) < 1e-10

    def test_dyadic_support(self):
        for n in (0, 2, 5):
            lo, hi = 2.0**-n / 16.0, 2.0**-n / 4.0
            assert dyadic_partition_eval(self.PART, n, lo) == 0.0
            assert dyadic_partition_eval(self.PART, n, hi) == 0.0
            assert dyadic_partition_eval(self.PART, n, 0.6 * lo) == 0.0
            assert dyadic_partition_eval(self.PART, n, 1.5 * hi) == 0.0
            assert dyadic_partition_eval(self.PART, n, math.sqrt(lo * hi)) > 0.0

    def test_dyadic_levels_disjoint_at_distance_two(self):
        r = np.geomspace(1e-4, 1.0, 4001)
        l0 = dyadic_partition_eval(self.PART, 0, r)
        for n in (2, 3, 4):
            assert np.max(l0 * dyadic_partition_eval(self.PART, n, r)) == 0.0

    def test_spatial_pinned_point(self):
        assert abs(spatial_bump_torus_sum(self.BUMP, 4, np.array([0.3]))[0] - 1.0) < 1e-10

    def test_spatial_sum_dense(self):
        xs = np.linspace(-0.5, 0.4999, 257)
        for n in (1, 2, 4, 6):
            v = spatial_bump_torus_sum(self.BUMP, n, xs)
            assert np.max(np.abs(v - 1.0)) < 1e-10

    def test_spatial_symmetric_and_supported(self):
        xs = np.linspace(-0.49, 0.49, 99)
        v = self.BUMP(xs)
        assert np.max(np.abs(v - v[::-1])) < 1e-14
        assert self.BUMP(np.array([0.5]))[0] == 0.0
        assert spatial_bump_eval(self.BUMP, 2, np.array([0.2]))[0] == 0.0
