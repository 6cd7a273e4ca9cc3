import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from lfdr_lab import (
    GaussianComponent,
    InvalidModel,
    TwoGroupModel,
    gaussian_cdf,
    gaussian_pdf,
    lfdr,
    marginal_density,
    mixture_model,
    model_point,
    two_sided_pvalue,
)

STD = GaussianComponent(0.0, 1.0)


def fig2_model():
    # asymmetric mixture: 0.15 at -3, 0.05 at +4 (see tests below for why
    # the heavier weight sits on the negative component)
    return mixture_model(0.8, [(0.15, -3.0, 1.0), (0.05, 4.0, 1.0)])


def hand_phi(z, mean=0.0, sd=1.0):
    # independent closed-form oracle, pure math module
    return math.exp(-0.5 * ((z - mean) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))


class TestGaussianPdf:
    def test_mode_value(self):
        assert_allclose(gaussian_pdf(0.0, STD), 1.0 / math.sqrt(2.0 * math.pi), rtol=1e-15)

    def test_symmetry_about_mean(self):
        assert gaussian_pdf(1.0, STD) == gaussian_pdf(-1.0, STD)
        c = GaussianComponent(2.5, 0.7)
        assert_allclose(gaussian_pdf(2.5 + 0.9, c), gaussian_pdf(2.5 - 0.9, c), rtol=1e-15)

    def test_at_one(self):
        # frozen from the closed form: exp(-1/2)/sqrt(2 pi)
        assert_allclose(gaussian_pdf(1.0, STD), 0.24197072451914337, rtol=1e-14)
        assert_allclose(gaussian_pdf(1.0, STD), hand_phi(1.0), rtol=1e-14)

    def test_strictly_positive_far_tail(self):
        assert gaussian_pdf(-37.0, STD) > 0.0

    def test_vectorized(self):
        z = np.array([-1.0, 0.0, 2.0])
        assert_allclose(gaussian_pdf(z, STD), [hand_phi(v) for v in z], rtol=1e-14)


class TestGaussianCdf:
    def test_center(self):
        assert gaussian_cdf(0.0, STD) == 0.5

    def test_normalization_limit(self):
        assert gaussian_cdf(math.inf, STD) == 1.0
        assert gaussian_cdf(40.0, STD) == 1.0

    def test_against_erf_identity(self):
        # oracle: Phi(x) = (1 + erf(x/sqrt(2)))/2 via the math module
        for x in np.linspace(-8.0, 8.0, 97):
            want = 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
            assert abs(gaussian_cdf(x, STD) - want) <= 1e-12

    def test_quantile_1_96(self):
        # frozen via mpmath.ncdf(mpmath.mpf('1.96')) = 0.97500210485177952...
        assert_allclose(gaussian_cdf(1.96, STD), 0.9750021048517795, atol=1e-12)

    def test_monotone(self):
        z = np.linspace(-10, 10, 2001)
        assert np.all(np.diff(gaussian_cdf(z, STD)) >= 0.0)

    def test_derivative_matches_pdf(self):
        h = 1e-5
        z = np.linspace(-8.0, 8.0, 161)
        deriv = (gaussian_cdf(z + h, STD) - gaussian_cdf(z - h, STD)) / (2 * h)
        assert np.max(np.abs(deriv - gaussian_pdf(z, STD))) <= 1e-6


class TestMarginalDensity:
    def test_pure_null_degenerate(self):
        m = mixture_model(1.0, [])
        for z in (-3.0, 0.0, 1.7, 6.0):
            assert_allclose(marginal_density(m, z), gaussian_pdf(z, STD), rtol=1e-14)

    def test_fig2_hand_sum(self):
        # oracle: three-term hand sum
        want = 0.8 * hand_phi(-2.0) + 0.15 * hand_phi(-2.0, -3.0) + 0.05 * hand_phi(-2.0, 4.0)
        assert_allclose(want, 0.0794883821922161, rtol=1e-12)  # frozen
        assert_allclose(marginal_density(fig2_model(), -2.0), want, rtol=1e-12)

    def test_integrates_to_one(self):
        # quadrature oracle over [min mean - 10, max mean + 10]
        m = fig2_model()
        total, _ = quad(lambda z: marginal_density(m, z), -13.0, 14.0, limit=200)
        assert abs(total - 1.0) <= 1e-6

    def test_integrates_to_one_random_models(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            w = rng.dirichlet([1.0, 1.0, 1.0])
            means = rng.uniform(-4, 4, size=2)
            sds = rng.uniform(0.5, 2.0, size=2)
            m = mixture_model(w[0], [(w[1], means[0], sds[0]), (w[2], means[1], sds[1])])
            lo = min(0.0, *means) - 10 * max(1.0, *sds)
            hi = max(0.0, *means) + 10 * max(1.0, *sds)
            total, _ = quad(lambda z: marginal_density(m, z), lo, hi, limit=200)
            assert abs(total - 1.0) <= 1e-6

    def test_strictly_positive(self):
        m = fig2_model()
        assert marginal_density(m, -12.0) > 0.0


class TestLfdr:
    def test_pure_null_is_one(self):
        m = mixture_model(1.0, [])
        for z in (-5.0, 0.0, 2.3):
            assert lfdr(m, z) == 1.0

    def test_fig2_probe_values(self):
        # oracle: direct ratio of hand sums
        m = fig2_model()
        for z, frozen in ((-2.0, 0.5433847314454477), (3.0, 0.22663482060602386)):
            f = 0.8 * hand_phi(z) + 0.15 * hand_phi(z, -3.0) + 0.05 * hand_phi(z, 4.0)
            want = 0.8 * hand_phi(z) / f
            assert_allclose(want, frozen, rtol=1e-12)
            assert_allclose(lfdr(m, z), frozen, rtol=1e-10)

    def test_reported_pair_is_unordered_set(self):
        # the printed pair {0.227, 0.543} matches the probes as a set
        m = fig2_model()
        got = sorted([lfdr(m, -2.0), lfdr(m, 3.0)])
        assert abs(got[0] - 0.227) <= 5e-3
        assert abs(got[1] - 0.543) <= 5e-3

    def test_swapped_weight_assignment_does_not_match(self):
        # placing 0.15 on the +4 component gives a very different pair
        m = mixture_model(0.8, [(0.05, -3.0, 1.0), (0.15, 4.0, 1.0)])
        got = sorted([lfdr(m, -2.0), lfdr(m, 3.0)])
        assert abs(got[0] - 0.227) > 0.05 and abs(got[1] - 0.543) > 0.05

    def test_in_unit_interval(self):
        rng = np.random.default_rng(11)
        m = fig2_model()
        z = rng.uniform(-10, 10, size=400)
        vals = lfdr(m, z)
        assert np.all(vals > 0.0)
        assert np.all(vals <= 1.0 + 1e-12)

    def test_component_order_invariance(self):
        a = mixture_model(0.8, [(0.15, -3.0, 1.0), (0.05, 4.0, 1.0)])
        b = mixture_model(0.8, [(0.05, 4.0, 1.0), (0.15, -3.0, 1.0)])
        z = np.linspace(-6, 7, 53)
        assert_allclose(lfdr(a, z), lfdr(b, z), rtol=1e-13)


class TestTwoSidedPvalue:
    def test_center_is_one(self):
        assert two_sided_pvalue(0.0, STD) == 1.0

    def test_probe_values(self):
        # the 0.046 / 0.003 probes, exact values frozen
        assert_allclose(two_sided_pvalue(-2.0, STD), 0.04550026389635842, rtol=1e-12)
        assert abs(two_sided_pvalue(-2.0, STD) - 0.046) <= 5e-4
        assert_allclose(two_sided_pvalue(3.0, STD), 0.0026997960632601866, rtol=1e-12)
        assert abs(two_sided_pvalue(3.0, STD) - 0.003) <= 5e-4

    def test_symmetry(self):
        c = GaussianComponent(1.2, 0.8)
        for z in (-3.0, 0.4, 2.8):
            assert_allclose(
                two_sided_pvalue(z, c), two_sided_pvalue(2 * c.mean - z, c), rtol=1e-13
            )

    def test_in_unit_interval(self):
        z = np.linspace(-30, 30, 301)
        p = two_sided_pvalue(z, STD)
        assert np.all(p > 0.0) and np.all(p <= 1.0)


class TestModelTypes:
    def test_component_validation(self):
        with pytest.raises(InvalidModel):
            GaussianComponent(0.0, 0.0)
        with pytest.raises(InvalidModel):
            GaussianComponent(math.nan, 1.0)

    def test_weight_sum_enforced(self):
        with pytest.raises(InvalidModel):
            mixture_model(0.8, [(0.1, -3.0, 1.0)])

    def test_nonnull_required_unless_pure_null(self):
        with pytest.raises(InvalidModel):
            TwoGroupModel(p0=0.9, null=STD, nonnull=())
        assert TwoGroupModel(p0=1.0, null=STD, nonnull=()).p0 == 1.0

    def test_negative_weight_rejected(self):
        with pytest.raises(InvalidModel):
            mixture_model(1.1, [(-0.1, 0.0, 1.0)])

    def test_model_point_consistency(self):
        m = fig2_model()
        pt = model_point(m, -2.0)
        assert pt.z == -2.0
        assert_allclose(pt.f, marginal_density(m, -2.0), rtol=1e-14)
        assert_allclose(pt.f0_scaled, 0.8 * gaussian_pdf(-2.0, STD), rtol=1e-14)
        assert 0.0 <= pt.lfdr <= 1.0
        assert pt.f >= pt.f0_scaled >= 0.0
