import numpy as np
import pytest

from lfsm.errors import ParameterError
from lfsm.fbm import FbmParams
from lfsm.lepage import (
    SeriesConfig,
    YSample,
    default_series_length,
    distinctness_check_alpha1,
    holder_estimate_Y,
    lepage_indicator_check,
    sample_Y_paths,
    self_similarity_check,
    stationary_increments_check,
)
from lfsm.localtime import scale_of_Y
from lfsm.rng import RngStream
from lfsm.stable import StableParams, sample_sas
from lfsm.stats import ks_two_sample


def small_config(**kw):
    base = dict(alpha=1.5, H=0.5, t_grid=(0.0, 0.5, 1.0), replicates=50,
                J=300, seed=1, fbm=FbmParams(H=0.5, N=256, T=1.0))
    base.update(kw)
    return SeriesConfig(**base)


class TestConfig:
    def test_default_series_length(self):
        assert default_series_length(1.5) == 2000
        assert default_series_length(1.0) == 2000
        assert default_series_length(0.75) == 500

    def test_rejects_infeasible_pair(self):
        with pytest.raises(ParameterError):
            SeriesConfig(alpha=2.5, H=0.5, t_grid=(1.0,), replicates=10)

    def test_rejects_short_horizon(self):
        cfg = small_config(fbm=FbmParams(H=0.5, N=256, T=0.5))
        with pytest.raises(ParameterError):
            cfg.fbm_params()

    def test_rejects_unknown_method(self):
        with pytest.raises(ParameterError):
            small_config(fbm_method="exact")


class TestSampler:
    def test_zero_at_time_zero(self):
        ys = sample_Y_paths(small_config())
        assert np.all(ys.values[:, 0] == 0.0)

    def test_deterministic_and_thread_invariant(self):
        cfg = small_config()
        a = sample_Y_paths(cfg, threads=1)
        b = sample_Y_paths(cfg, threads=3)
        assert np.array_equal(a.values, b.values)

    def test_truncation_coupling(self):
        # a longer series extends the same draw, so the coupled difference is
        # exactly the added tail and the empirical scale moves by little
        c1 = small_config(J=512, replicates=400)
        c2 = small_config(J=1024, replicates=400)
        y1, y2 = sample_Y_paths(c1), sample_Y_paths(c2)
        diff = y2.column(1.0) - y1.column(1.0)
        assert np.median(np.abs(diff)) < 0.1 * np.median(np.abs(y1.column(1.0)))

    def test_sign_symmetry(self):
        ys = sample_Y_paths(small_config(replicates=400))
        d, p = ks_two_sample(ys.column(1.0), -ys.column(1.0))
        assert p > 0.01

    def test_marginal_vs_direct_oracle(self):
        cfg = small_config(replicates=400, J=800)
        ys = sample_Y_paths(cfg)
        scale, _ = scale_of_Y(1.5, 0.5, 1.0, 2000, RngStream(77),
                              fbm=cfg.fbm_params(), bandwidth=cfg.eps())
        oracle = sample_sas(StableParams(1.5, scale), 50_000, RngStream(78))
        d, p = ks_two_sample(ys.column(1.0), oracle)
        assert p > 0.01

    def test_volterra_inner_paths(self):
        # generator exchangeability: the marginal check also passes when the
        # inner paths come from the moving-average generator
        cfg = small_config(replicates=400, J=800, fbm_method="volterra")
        ys = sample_Y_paths(cfg)
        scale, _ = scale_of_Y(1.5, 0.5, 1.0, 2000, RngStream(79),
                              fbm=cfg.fbm_params(), bandwidth=cfg.eps(),
                              method="volterra")
        oracle = sample_sas(StableParams(1.5, scale), 50_000, RngStream(80))
        d, p = ks_two_sample(ys.column(1.0), oracle)
        assert p > 0.01

    def test_csv_schema(self):
        import io
        ys = sample_Y_paths(small_config(replicates=3))
        buf = io.StringIO()
        ys.to_csv(buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "replicate,t,value"
        assert len(lines) == 1 + 3 * 3

    def test_column_lookup(self):
        ys = sample_Y_paths(small_config(replicates=3))
        with pytest.raises(ParameterError):
            ys.column(0.7)


class TestIndicatorOracle:
    def test_passes_small(self):
        rep = lepage_indicator_check(0.75, 2000, 3000, RngStream(30),
                                     oracle_size=50_000)
        assert rep.passed

    def test_wrong_prefactor_fails(self):
        rep = lepage_indicator_check(0.75, 2000, 3000, RngStream(31),
                                     prefactor_multiplier=2.0, oracle_size=50_000)
        assert not rep.passed
        assert rep.statistics["p_value"] < 1e-6


class TestSelfSimilarity:
    def test_synthetic_exact_scaling(self):
        # replicate-wise t^{H'} Z has the exact exponent by construction
        cfg = small_config(t_grid=(0.25, 0.5, 1.0, 2.0), replicates=3000)
        hp = 1.0 - 0.5 + 0.5 / 1.5
        z = sample_sas(StableParams(1.5, 1.0), 3000, RngStream(32))
        t = np.asarray(cfg.t_grid)
        values = z[:, None] * t[None, :] ** hp
        ys = YSample(t, values, cfg, 0.0, False)
        rep = self_similarity_check(ys)
        assert rep.passed
        assert rep.statistics["slope"] == pytest.approx(hp, abs=0.02)

    def test_requires_grid_span(self):
        ys = sample_Y_paths(small_config(t_grid=(0.5, 1.0), replicates=3))
        with pytest.raises(ParameterError):
            self_similarity_check(ys)


class TestStationaryIncrements:
    def test_synthetic_negative_control(self):
        # Y(t+h) - Y(h) has scale t^{H'}; comparing against Y(t+h) must fail
        hp = 5.0 / 6.0
        cfg = small_config(t_grid=(1.5,), replicates=4000)
        gen_scale = 1.5 ** hp
        incr = sample_sas(StableParams(1.5, 1.0), 4000, RngStream(33))
        wrong = sample_sas(StableParams(1.5, gen_scale), 4000, RngStream(34))
        d, p = ks_two_sample(incr, wrong)
        assert p < 0.01

    def test_increments_match_base(self):
        shifted = sample_Y_paths(small_config(t_grid=(0.5, 1.0), replicates=600))
        base = sample_Y_paths(small_config(t_grid=(0.5,), replicates=600, seed=9))
        rep = stationary_increments_check(shifted, base, 0.5, 0.5)
        assert rep.passed


class TestHolderEstimate:
    def synthetic_sample(self, values, t):
        cfg = small_config(t_grid=tuple(t), replicates=values.shape[0])
        return YSample(np.asarray(t), values, cfg, 0.0, False)

    def test_zero_replicate_zero_sup(self):
        t = np.linspace(0.0, 0.5, 17)
        gen = RngStream(35).generator()
        vals = np.vstack([np.zeros(17), np.cumsum(gen.standard_normal((5, 17)), axis=1)])
        out = holder_estimate_Y(self.synthetic_sample(vals, t), H=0.5)
        assert out["sup_stats"][0] == 0.0
        assert np.all(out["sup_stats"][1:] > 0.0)

    def test_grid_guards(self):
        t = np.linspace(0.0, 0.5, 16)  # 15 gaps, not dyadic
        vals = np.zeros((3, 16))
        with pytest.raises(ParameterError):
            holder_estimate_Y(self.synthetic_sample(vals, t), H=0.5)
        t2 = np.linspace(0.0, 1.0, 17)
        with pytest.raises(ParameterError):
            holder_estimate_Y(self.synthetic_sample(np.zeros((3, 17)), t2), H=0.5)

    def test_brownian_slope_recovers_half(self):
        # fractional noise of a known regularity as a stand-in: Brownian
        # paths have increment exponent 1/2
        gen = RngStream(36).generator()
        t = np.linspace(0.0, 0.5, 129)
        vals = np.cumsum(gen.standard_normal((200, 129)) * np.sqrt(0.5 / 128), axis=1)
        vals -= vals[:, :1]
        out = holder_estimate_Y(self.synthetic_sample(vals, t), H=0.5)
        assert out["median_slope"] == pytest.approx(0.5, abs=0.1)


class TestDistinctness:
    @pytest.mark.slow
    def test_same_h_not_distinct(self):
        rep = distinctness_check_alpha1(0.5, 0.5, (1.0, 2.0), replicates=800,
                                        seed=40, J=400,
                                        fbm=FbmParams(H=0.5, N=256, T=2.0))
        assert not rep.passed
        assert rep.statistics["max_z_marginal"] <= 3.0
