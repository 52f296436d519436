import math

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn
from scipy.stats import kstest, levy_stable

from lfsm.errors import ParameterError
from lfsm.rng import RngStream
from lfsm.stable import (
    StableParams,
    gaussian_abs_moment,
    hurst_prime,
    lepage_prefactor,
    pareto_sigma_w,
    sample_pareto_rewards,
    sample_sas,
    stable_tail_constant,
    validate_pair,
)
from lfsm.stats import ecf_scale


class TestHurstPrime:
    def test_values(self):
        assert hurst_prime(1.5, 0.5) == pytest.approx(5.0 / 6.0, abs=1e-12)
        assert hurst_prime(1.0, 0.3) == 1.0
        assert hurst_prime(0.5, 0.5) == pytest.approx(1.5, abs=1e-12)

    @pytest.mark.parametrize("alpha,H", [(0.0, 0.5), (2.0, 0.5), (1.5, 0.0), (1.5, 1.0)])
    def test_rejects_out_of_range(self, alpha, H):
        with pytest.raises(ParameterError):
            hurst_prime(alpha, H)

    def test_branch_property_over_grid(self):
        # exponent always lands in the branch selected by alpha
        alphas = [k / 20.0 for k in range(2, 40) if k != 20] + [1.0]
        for alpha in alphas:
            for H in np.linspace(0.05, 0.95, 19):
                hp = hurst_prime(alpha, H)
                if alpha < 1.0:
                    assert 1.0 < hp < 1.0 / alpha
                elif alpha == 1.0:
                    assert hp == 1.0
                else:
                    assert 1.0 / alpha < hp < 1.0


class TestValidatePair:
    def test_feasible_small_alpha(self):
        rep = validate_pair(0.5, 0.2)
        assert rep.feasible_pair
        assert rep.h_prime == pytest.approx(1.2)
        assert rep.range_case == "1 < H' < 1/alpha"

    def test_feasible_large_alpha(self):
        rep = validate_pair(1.5, 0.97)
        assert rep.feasible_pair
        assert 1.0 / 1.5 < rep.h_prime < 1.0
        assert rep.range_case == "1/alpha < H' < 1"

    def test_alpha_one(self):
        rep = validate_pair(1.0, 0.42)
        assert rep.feasible_pair and rep.h_prime == 1.0 and rep.range_case == "H' = 1"

    def test_infeasible(self):
        rep = validate_pair(2.1, 0.5)
        assert not rep.feasible_pair and rep.h_prime is None


class TestStableTailConstant:
    def test_dirichlet_value(self):
        assert stable_tail_constant(1.0) == pytest.approx(2.0 / math.pi, abs=1e-6)

    def test_against_closed_form(self):
        for alpha in (0.25, 0.5, 0.75, 1.25, 1.5, 1.75):
            closed = 1.0 / (gamma_fn(1.0 - alpha) * math.cos(math.pi * alpha / 2.0))
            assert stable_tail_constant(alpha) == pytest.approx(closed, rel=1e-8)

    def test_known_points(self):
        assert stable_tail_constant(0.5) == pytest.approx(0.7978846, abs=1e-6)
        assert stable_tail_constant(1.5) == pytest.approx(0.3989423, abs=1e-6)

    @pytest.mark.parametrize("alpha", [0.0, 2.0, -1.0])
    def test_rejects(self, alpha):
        with pytest.raises(ParameterError):
            stable_tail_constant(alpha)


class TestSampleSas:
    def test_gaussian_endpoint(self):
        # alpha = 2 with scale 1 is N(0, 2)
        x = sample_sas(StableParams(2.0, 1.0), 20_000, RngStream(1))
        res = kstest(x / math.sqrt(2.0), "norm")
        assert res.pvalue > 0.01

    def test_zero_scale_degenerate(self):
        assert np.all(sample_sas(StableParams(1.5, 0.0), 100, RngStream(2)) == 0.0)

    def test_cauchy_median_and_scale(self):
        x = sample_sas(StableParams(1.0, 1.0), 100_000, RngStream(3))
        assert abs(np.median(x)) < 0.02
        s, _ = ecf_scale(x, 1.0)
        assert s == pytest.approx(1.0, rel=0.02)

    @pytest.mark.parametrize("alpha", [0.75, 1.3])
    def test_against_scipy_cdf(self, alpha):
        x = sample_sas(StableParams(alpha, 1.0), 800, RngStream(4))
        res = kstest(x, levy_stable(alpha, 0.0).cdf)
        assert res.pvalue > 0.01

    def test_deterministic(self):
        a = sample_sas(StableParams(1.5, 1.0), 64, RngStream(7, 3))
        b = sample_sas(StableParams(1.5, 1.0), 64, RngStream(7, 3))
        assert np.array_equal(a, b)

    def test_rejects_empty(self):
        with pytest.raises(ParameterError):
            sample_sas(StableParams(1.5, 1.0), 0, RngStream(0))


class TestParetoRewards:
    def test_magnitude_floor(self):
        w = sample_pareto_rewards(1.2, 10_000, RngStream(5))
        assert np.all(np.abs(w) >= 1.0)

    def test_exact_tail(self):
        n = 100_000
        w = sample_pareto_rewards(1.0, n, RngStream(6))
        p2 = np.mean(w > 2.0)
        se = math.sqrt(0.25 * 0.75 / n)
        assert abs(p2 - 0.25) <= 3.0 * se

    def test_sign_symmetry(self):
        n = 100_000
        w = sample_pareto_rewards(1.5, n, RngStream(7))
        assert abs(np.mean(np.sign(w))) <= 3.0 / math.sqrt(n)

    def test_two_sided_tail_invariant(self):
        n = 1_000_000
        alpha = 1.5
        w = sample_pareto_rewards(alpha, n, RngStream(8))
        for x in (2.0, 4.0, 8.0):
            assert x ** alpha * np.mean(np.abs(w) > x) == pytest.approx(1.0, rel=0.05)

    def test_sigma_w(self):
        assert pareto_sigma_w(1.0) == 0.5
        assert pareto_sigma_w(2.0) == pytest.approx(2.0 ** -0.5)


class TestGaussianAbsMoment:
    def test_second_moment(self):
        assert gaussian_abs_moment(2.0) == pytest.approx(1.0, abs=1e-12)

    def test_first_moment(self):
        assert gaussian_abs_moment(1.0) == pytest.approx(math.sqrt(2.0 / math.pi), abs=1e-12)

    def test_half_moment_against_mc(self):
        g = RngStream(9).generator().standard_normal(1_000_000)
        mc = np.mean(np.sqrt(np.abs(g)))
        se = np.std(np.sqrt(np.abs(g))) / 1000.0
        val = gaussian_abs_moment(0.5)
        assert abs(val - mc) <= 4.0 * se
        assert val == pytest.approx(0.8222, abs=2e-4)


class TestLepagePrefactor:
    def test_alpha_one_closed_form(self):
        # (2/pi) sqrt(2 pi) / sqrt(2/pi) = 2
        assert lepage_prefactor(1.0) == pytest.approx(2.0, abs=1e-10)

    def test_positive_over_grid(self):
        for alpha in np.linspace(0.1, 1.9, 10):
            assert lepage_prefactor(alpha) > 0.0


class TestStableParams:
    def test_validation(self):
        with pytest.raises(ParameterError):
            StableParams(2.5, 1.0)
        with pytest.raises(ParameterError):
            StableParams(1.0, -0.1)
        StableParams(2.0, 0.0)
