import math

import numpy as np
import pytest
from scipy.stats import kstest

from lfsm.errors import DiagnosticError, ParameterError
from lfsm.rng import RngStream
from lfsm.stable import StableParams, sample_sas
from lfsm.stats import (
    EmpiricalDistribution,
    StatReport,
    ecf_scale,
    ks_two_sample,
    loglog_slope,
)


class TestKs:
    def test_identical_samples(self):
        x = RngStream(0).generator().standard_normal(500)
        d, p = ks_two_sample(x, x)
        assert d == 0.0 and p == 1.0

    def test_shifted_uniforms(self):
        gen = RngStream(1).generator()
        a = gen.uniform(0.0, 1.0, 10_000)
        b = gen.uniform(0.5, 1.5, 10_000)
        d, p = ks_two_sample(a, b)
        assert d == pytest.approx(0.5, abs=0.03)
        assert p < 1e-10

    def test_pvalues_uniform_under_null(self):
        gen_stream = RngStream(2)
        ps = []
        for k in range(200):
            gen = gen_stream.substream(k).generator()
            ps.append(ks_two_sample(gen.standard_normal(500), gen.standard_normal(500))[1])
        res = kstest(ps, "uniform")
        assert res.pvalue > 0.01

    def test_accepts_empirical_distribution(self):
        x = np.array([1.0, 2.0, 3.0])
        d, p = ks_two_sample(EmpiricalDistribution.from_sample(x), x)
        assert d == 0.0

    def test_rejects_empty(self):
        with pytest.raises(ParameterError):
            ks_two_sample(np.array([]), np.array([1.0]))


class TestEcfScale:
    def test_recovers_known_scale(self):
        x = sample_sas(StableParams(1.5, 2.0), 100_000, RngStream(3))
        s, se = ecf_scale(x, 1.5)
        assert s == pytest.approx(2.0, rel=0.03)
        assert 0.0 < se < 0.1

    def test_degenerate_sample_raises(self):
        with pytest.raises(DiagnosticError):
            ecf_scale(np.zeros(100), 1.5)

    def test_exact_scale_equivariance(self):
        x = sample_sas(StableParams(1.2, 1.0), 5000, RngStream(4))
        s1, _ = ecf_scale(x, 1.2, n_boot=10)
        s2, _ = ecf_scale(2.0 * x, 1.2, n_boot=10)
        assert s2 == 2.0 * s1


class TestLoglogSlope:
    def test_exact_power_law(self):
        t = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
        slope, se = loglog_slope(t, t ** 0.8)
        assert slope == pytest.approx(0.8, abs=1e-12)
        assert se == pytest.approx(0.0, abs=1e-12)

    def test_constant_scales(self):
        slope, _ = loglog_slope([1.0, 2.0, 4.0], [3.0, 3.0, 3.0])
        assert slope == pytest.approx(0.0, abs=1e-15)

    def test_noisy_coverage(self):
        # with 5% multiplicative noise the truth lands within 2 reported
        # standard errors in at least 90% of repetitions
        t = np.array([0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
        hits = 0
        reps = 300
        for k in range(reps):
            gen = RngStream(5, k).generator()
            s = t ** 0.8 * np.exp(0.05 * gen.standard_normal(t.size))
            slope, se = loglog_slope(t, s)
            hits += abs(slope - 0.8) <= 2.0 * se
        assert hits / reps >= 0.90

    def test_rejects_bad_input(self):
        with pytest.raises(ParameterError):
            loglog_slope([1.0, 2.0], [1.0, 2.0])
        with pytest.raises(ParameterError):
            loglog_slope([1.0, 2.0, -3.0], [1.0, 2.0, 3.0])


class TestReportTypes:
    def test_empirical_distribution_sorted(self):
        e = EmpiricalDistribution.from_sample([3.0, 1.0, 2.0])
        assert np.array_equal(e.values, [1.0, 2.0, 3.0])
        assert e.size == 3
        with pytest.raises(ParameterError):
            EmpiricalDistribution.from_sample([])

    def test_stat_report_serializable(self):
        import json
        r = StatReport("x", {"d": np.float64(0.1), "arr": np.arange(3)},
                       {"p": 0.01}, True, {"seed": np.int64(7)})
        doc = json.dumps(r.to_dict())
        assert "0.1" in doc
