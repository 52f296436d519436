import io
import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import beta as beta_fn

from lfsm.errors import ParameterError
from lfsm.fbm import (
    FbmParams,
    VolterraGrid,
    fbm_cov,
    generate_fbm_spectral,
    generate_fbm_volterra,
    kernel_KH,
    kernel_norm_constant,
    sample_fbm_spectral,
    sample_fbm_volterra,
)
from lfsm.rng import RngStream
from lfsm.stats import ks_two_sample


class TestCov:
    def test_brownian_case_is_min(self):
        for s, t in [(0.2, 0.9), (0.5, 0.5), (0.0, 1.0)]:
            assert fbm_cov(s, t, 0.5) == pytest.approx(min(s, t), abs=1e-14)

    def test_unit_variance(self):
        assert fbm_cov(1.0, 1.0, 0.7) == pytest.approx(1.0)

    def test_direct_value(self):
        expected = 0.5 * (1.0 + 0.25 ** 1.5 - 0.75 ** 1.5)
        assert fbm_cov(0.25, 1.0, 0.75) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.23774, abs=5e-6)

    def test_symmetric_in_arguments(self):
        assert fbm_cov(1.0, 0.25, 0.75) == fbm_cov(0.25, 1.0, 0.75)


class TestSpectral:
    def test_starts_at_zero_and_shape(self):
        params = FbmParams(H=0.7, N=256, T=1.0)
        path = generate_fbm_spectral(params, RngStream(0))
        assert path.values[0] == 0.0
        assert path.values.shape == (257,)
        assert path.times[-1] == pytest.approx(1.0)

    def test_requires_power_of_two(self):
        with pytest.raises(ParameterError):
            generate_fbm_spectral(FbmParams(H=0.5, N=100), RngStream(0))

    def test_brownian_increments_white(self):
        params = FbmParams(H=0.5, N=256, T=1.0)
        vals = sample_fbm_spectral(params, 4000, RngStream(1))
        inc = np.diff(vals, axis=1)
        rho = np.mean(inc[:, :-1] * inc[:, 1:]) / np.mean(inc ** 2)
        assert abs(rho) < 3.0 / math.sqrt(inc.size)

    def test_covariance_against_formula(self):
        params = FbmParams(H=0.7, N=512, T=1.0)
        vals = sample_fbm_spectral(params, 10_000, RngStream(2))
        emp = np.mean(vals[:, 256] * vals[:, 512])
        assert emp == pytest.approx(fbm_cov(0.5, 1.0, 0.7), rel=0.05)

    def test_terminal_variance_self_similar(self):
        params = FbmParams(H=0.3, sigma2=2.0, N=256, T=2.0)
        vals = sample_fbm_spectral(params, 8000, RngStream(3))
        target = 2.0 * 2.0 ** 0.6
        assert vals[:, -1].var(ddof=1) == pytest.approx(target, rel=0.06)

    def test_self_similarity_of_variance(self):
        # var B(ct) = c^{2H} var B(t) within 3 MC standard errors
        params = FbmParams(H=0.7, N=512, T=1.0)
        vals = sample_fbm_spectral(params, 8000, RngStream(4))
        for c, i, j in ((2, 128, 256), (4, 128, 512)):
            v1 = vals[:, i].var(ddof=1)
            v2 = vals[:, j].var(ddof=1)
            se = (v2 / v1) * math.sqrt(2.0 * 2.0 / 7999)
            assert abs(v2 / v1 - c ** 1.4) <= 3.0 * se

    def test_increment_stationarity(self):
        params = FbmParams(H=0.7, N=512, T=1.0)
        vals = sample_fbm_spectral(params, 5000, RngStream(5))
        # B(t+h) - B(h) vs B(t) at (t, h) = (0.25, 0.5)
        shifted = vals[:, 384] - vals[:, 256]
        base = sample_fbm_spectral(params, 5000, RngStream(6))[:, 128]
        d, p = ks_two_sample(shifted, base)
        assert p > 0.01

    def test_csv_roundtrip(self):
        path = generate_fbm_spectral(FbmParams(H=0.5, N=4), RngStream(7))
        buf = io.StringIO()
        path.to_csv(buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "t,value"
        assert len(lines) == 6


class TestKernel:
    def test_brownian_kernel_is_one(self):
        for s in (0.1, 0.5, 0.9):
            assert kernel_KH(1.0, s, 0.5) == 1.0

    def test_zero_outside_support(self):
        assert kernel_KH(1.0, 2.0, 0.7) == 0.0
        assert kernel_KH(1.0, -0.3, 0.7) == 0.0
        assert kernel_KH(1.0, 1.0, 0.7) == 0.0

    @pytest.mark.parametrize("H", [0.3, 0.7])
    def test_rescaling_identity(self, H):
        rng = RngStream(8).generator()
        for _ in range(100):
            a, u = rng.uniform(0.3, 3.0, 2)
            w = rng.uniform(0.0, a * u)
            lhs = kernel_KH(a * u, w, H)
            rhs = a ** (H - 0.5) * kernel_KH(u, w / a, H)
            assert lhs == pytest.approx(rhs, abs=1e-8, rel=1e-8)

    def test_norm_constant_brownian(self):
        assert kernel_norm_constant(0.5) == 1.0

    def test_norm_constant_closed_form(self):
        # independent closed form for H > 1/2:
        # C_H = (H-1/2)^2 B(2-2H, H-1/2) / (H (2H-1))
        H = 0.7
        closed = (H - 0.5) ** 2 * beta_fn(2.0 - 2.0 * H, H - 0.5) / (H * (2.0 * H - 1.0))
        assert kernel_norm_constant(H) == pytest.approx(closed, rel=1e-8)

    @pytest.mark.parametrize("H", [0.3, 0.7])
    def test_norm_scaling_at_two(self, H):
        val, _ = quad(lambda w: kernel_KH(2.0, w, H) ** 2, 0.0, 2.0,
                      epsabs=1e-10, epsrel=1e-10, limit=400)
        assert val == pytest.approx(kernel_norm_constant(H) * 2.0 ** (2 * H), abs=1e-6)

    def test_norm_positive_and_stable(self):
        c = kernel_norm_constant(0.7)
        assert 0.0 < c < math.inf
        # refinement stability: recompute with a different tolerance path
        val, _ = quad(lambda w: kernel_KH(1.0, w, 0.7) ** 2, 0.0, 1.0,
                      epsabs=1e-12, epsrel=1e-12, limit=800)
        assert val == pytest.approx(c, abs=1e-6)


class TestVolterra:
    def test_brownian_case_exact(self):
        # H = 1/2 kernel is identically one: the path is a cumulated white noise
        params = FbmParams(H=0.5, N=64, T=1.0)
        path = generate_fbm_volterra(params, RngStream(9))
        z = RngStream(9).generator().standard_normal(64)
        manual = np.concatenate([[0.0], np.cumsum(z) * math.sqrt(params.dt)])
        assert np.allclose(path.values, manual, atol=1e-12)

    def test_batch_matches_single(self):
        params = FbmParams(H=0.7, N=128, T=1.0)
        grid = VolterraGrid.build(params)
        single = generate_fbm_volterra(params, RngStream(10), grid=grid)
        z = RngStream(10).generator().standard_normal(128)
        assert np.allclose(single.values, grid.weights @ z)

    def test_terminal_variance(self):
        params = FbmParams(H=0.7, N=4096, T=1.0)
        grid = VolterraGrid.build(params)
        row = grid.weights[-1]
        z = RngStream(11).generator().standard_normal((10_000, 4096))
        b1 = z @ row
        assert b1.var(ddof=1) == pytest.approx(1.0, rel=0.03)

    def test_cross_method_marginal(self):
        params = FbmParams(H=0.7, N=1024, T=1.0)
        a = sample_fbm_spectral(params, 4000, RngStream(12))[:, -1]
        b = sample_fbm_volterra(params, 4000, RngStream(13))[:, -1]
        d, p = ks_two_sample(a, b)
        assert p > 0.01

    def test_grid_params_mismatch_rejected(self):
        params = FbmParams(H=0.7, N=64, T=1.0)
        other = FbmParams(H=0.6, N=64, T=1.0)
        grid = VolterraGrid.build(params)
        with pytest.raises(ParameterError):
            generate_fbm_volterra(other, RngStream(0), grid=grid)
