"""Chaos decomposition of the local time, evaluated pathwise.

The local time of a fractional Brownian motion expands over Wiener chaos as
``l(x, t) = sum_n h_n(x, t)`` with

    ``h_n(x, t) = (C_H^{-n/2} / sigma) int_0^t p_{s^{2H}}(x/sigma) s^{-nH}
                  H_n((x/sigma) s^{-H}) I_n(K_H(s, .)^{(x) n}) ds``

where ``p_v`` is the N(0, v) density, ``H_n`` the n-th Hermite polynomial in
the 1/n! normalization, and ``I_n`` the n-fold Wiener integral driven by the
white noise of the Volterra representation.  The tensor-power integral
reduces pathwise through the standard Hermite identity

    ``I_n(K_H(s, .)^{(x) n}) = n! C_H^{n/2} s^{nH} H_n(B_H(s) / (sigma s^H))``

(``I_1(K_H(s, .)) = sqrt(C_H) B_H(s)/sigma`` and ``||K_H(s, .)||^2 = C_H
s^{2H}``), after which every ``C_H`` and ``s^{nH}`` cancels and

    ``h_n(x, t) = (1/sigma) int_0^t p_{s^{2H}}(x/sigma)
                  hh_n((x/sigma) s^{-H}) hh_n(B_H(s)/(sigma s^H)) ds``

with ``hh_n = He_n / sqrt(n!)`` the orthonormal Hermite functions.  The
reduction is validated numerically rather than assumed: the second-moment
quadrature :func:`second_moment` must match the Monte Carlo variance of
:func:`chaos_term` (see the test suite) before anything downstream is
believed.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import NumericalError, ParameterError
from .fbm import FbmParams, FbmPath, _spectral_values
from .lepage import SeriesConfig, YSample, PATH_CHUNK
from .rng import RngStream
from .stable import lepage_prefactor

__all__ = [
    "ChaosConfig",
    "ChaosField",
    "hermite",
    "expected_local_time",
    "chaos_term",
    "chaos_terms",
    "reconstruct_local_time",
    "second_moment",
    "chaos_tail_bound",
    "sample_Wn_paths",
]

MAX_PATHWISE_ORDER = 30


@dataclass(frozen=True)
class ChaosConfig:
    """Evaluation request: orders 0..m_max at one time over a level grid."""

    m_max: int
    H: float
    t: float
    x_grid: tuple
    sigma: float = 1.0
    tol: float = 1e-9

    def __post_init__(self):
        if self.m_max < 0:
            raise ParameterError("m_max must be >= 0")
        if self.tol <= 0.0:
            raise ParameterError("tol must be positive")


@dataclass(frozen=True)
class ChaosField:
    """Per-order kernel values for one path; ``values[n, i] = h_n(x_i, t)``."""

    x_grid: np.ndarray
    t: float
    values: np.ndarray

    def partial_sum(self, m: int) -> np.ndarray:
        return self.values[: m + 1].sum(axis=0)

    def to_csv(self, fileobj: io.TextIOBase) -> None:
        fileobj.write("n,x,value\n")
        for n in range(self.values.shape[0]):
            for i, x in enumerate(self.x_grid):
                fileobj.write(f"{n},{x!r},{self.values[n, i]!r}\n")


def hermite(n: int, x):
    """Hermite polynomial in the 1/n! normalization: ``H_0 = 1, H_1 = x,
    H_{n+1} = (x H_n - H_{n-1}) / (n + 1)``."""
    if n < 0:
        raise ParameterError("hermite order must be >= 0")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return float(prev) if prev.ndim == 0 else prev
    cur = x.copy()
    for k in range(1, n):
        prev, cur = cur, (x * cur - prev) / (k + 1)
    return float(cur) if cur.ndim == 0 else cur


def _hermite_orthonormal(nmax: int, z: np.ndarray) -> np.ndarray:
    """All ``He_n / sqrt(n!)`` for n = 0..nmax, stacked on a new leading axis."""
    out = np.empty((nmax + 1,) + z.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = z
    for n in range(1, nmax):
        out[n + 1] = (z * out[n] - math.sqrt(n) * out[n - 1]) / math.sqrt(n + 1)
    return out


def _hermite_halfweighted(nmax: int, z: np.ndarray) -> np.ndarray:
    """``e^{-z^2/4} He_n(z) / sqrt(n!)`` for n = 0..nmax.

    Bounded uniformly in n and z (Cramer's bound), so products with the
    remaining half of a Gaussian density can never overflow at high order.
    """
    out = np.empty((nmax + 1,) + z.shape)
    out[0] = np.exp(-z * z / 4.0)
    if nmax >= 1:
        out[1] = z * out[0]
    for n in range(1, nmax):
        out[n + 1] = (z * out[n] - math.sqrt(n) * out[n - 1]) / math.sqrt(n + 1)
    return out


def _normal_density(u, var):
    return np.exp(-u * u / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


def expected_local_time(x: float, t: float, H: float, sigma: float = 1.0) -> float:
    """Order-zero kernel ``h_0(x, t) = (1/sigma) int_0^t p_{s^{2H}}(x/sigma) ds``.

    This is the mean local time at level x; the s -> 0 endpoint is an
    integrable ``s^{-H}`` singularity when x = 0 and vanishes otherwise.
    """
    if t <= 0.0:
        raise ParameterError("expected_local_time needs t > 0")
    u = x / sigma
    val, err = quad(lambda s: _normal_density(u, s ** (2.0 * H)), 0.0, t,
                    epsabs=1e-12, epsrel=1e-11, limit=400)
    if err > 1e-8:
        raise NumericalError(f"h_0 quadrature error {err:.2e} at (x={x}, t={t}, H={H})")
    return val / sigma


def _panel_nodes(edges: np.ndarray, order: int = 16):
    base, bw = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1], edges[1:]
    nodes = 0.5 * (hi - lo)[:, None] * base[None, :] + 0.5 * (hi + lo)[:, None]
    weights = 0.5 * (hi - lo)[:, None] * np.broadcast_to(bw, nodes.shape)
    return nodes.ravel(), weights.ravel()


def _graded_edges(a: float, b: float, refine: int) -> np.ndarray:
    """Panel edges on [a, b] refined dyadically toward a."""
    frac = 2.0 ** (-np.arange(refine, 0, -1, dtype=float))
    return np.concatenate([[a], a + (b - a) * frac, [b]])


def _time_nodes(t_grid: np.ndarray, s_min: float, refine: int = 14):
    """Quadrature nodes whose panel edges contain every entry of t_grid,
    refined toward s_min on the first segment.  Returns nodes, weights and
    the cut index of each t in t_grid."""
    ts = np.asarray(sorted(set(float(t) for t in t_grid)))
    if ts[0] <= s_min:
        raise ParameterError("t grid must stay above the path resolution")
    all_nodes, all_weights, cuts = [], [], {}
    edges = _graded_edges(s_min, ts[0], refine)
    n, w = _panel_nodes(edges)
    all_nodes.append(n)
    all_weights.append(w)
    cuts[ts[0]] = n.size
    for a, b in zip(ts[:-1], ts[1:]):
        n, w = _panel_nodes(np.linspace(a, b, 9))
        all_nodes.append(n)
        all_weights.append(w)
        cuts[b] = cuts[a] + n.size
    return np.concatenate(all_nodes), np.concatenate(all_weights), cuts


def chaos_terms(path: FbmPath, m: int, x_grid, t: float) -> np.ndarray:
    """All kernels ``h_n(x, t)`` for n = 0..m along one path; shape (m+1, nx).

    The s integral uses Gauss-Legendre panels refined dyadically toward
    s = 0, truncated at one path step (sub-step contributions are zero-mean
    and below the path's own resolution); the order-zero term is evaluated
    by exact quadrature instead since it is path-free.
    """
    if m < 0:
        raise ParameterError("order must be >= 0")
    if m > MAX_PATHWISE_ORDER:
        raise ParameterError(
            f"pathwise orders above {MAX_PATHWISE_ORDER} are outside the tested range")
    params = path.params
    if t > params.T + 1e-12 or t <= 0.0:
        raise ParameterError(f"t={t} outside the path horizon (0, {params.T}]")
    x = np.atleast_1d(np.asarray(x_grid, dtype=float))
    sigma = params.sigma
    H = params.H
    out = np.empty((m + 1, x.size))
    out[0] = [expected_local_time(xi, t, H, sigma) for xi in x]
    if m == 0:
        return out

    s_min = max(params.dt, t * 2.0 ** -16)
    refine = max(4, int(math.ceil(math.log2(t / s_min))))
    nodes, weights, _ = _time_nodes([t], s_min, refine)
    b_nodes = np.interp(nodes, path.times, path.values)
    hv = _hermite_orthonormal(m, b_nodes / (sigma * nodes ** H))
    u = (x[:, None] / sigma) * nodes[None, :] ** (-H)
    hu = _hermite_orthonormal(m, u)
    dens = _normal_density(x[:, None] / sigma, nodes[None, :] ** (2.0 * H))
    base = dens * weights[None, :] / sigma
    for n in range(1, m + 1):
        out[n] = (base * hu[n] * hv[n][None, :]).sum(axis=1)
    return out


def chaos_term(path: FbmPath, n: int, x, t: float):
    """Kernel ``h_n(x, t)`` for one order; x may be scalar or array."""
    vals = chaos_terms(path, n, x, t)[n]
    return float(vals[0]) if np.isscalar(x) else vals


def reconstruct_local_time(path: FbmPath, m: int, x_grid, t: float) -> np.ndarray:
    """Partial sum ``sum_{n<=m} h_n(x, t)`` over the level grid."""
    return chaos_terms(path, m, x_grid, t).sum(axis=0)


def chaos_field(path: FbmPath, config: ChaosConfig) -> ChaosField:
    x = np.asarray(config.x_grid, dtype=float)
    return ChaosField(x, config.t, chaos_terms(path, config.m_max, x, config.t))


def _second_moments_upto(nmax: int, x: float, t: float, H: float, sigma: float) -> np.ndarray:
    """``E h_n(x, t)^2`` for n = 0..nmax by quadrature over the triangle
    s < s', using ``E[hh_n(A) hh_n(B)] = corr(A, B)^n`` for jointly standard
    normal pairs."""
    s_out, w_out = _panel_nodes(_graded_edges(0.0, t, 40), order=12)
    edges_in = _graded_edges(0.0, 1.0, 24)
    base, bw = np.polynomial.legendre.leggauss(12)
    lo, hi = edges_in[:-1], edges_in[1:]
    unit = (0.5 * (hi - lo)[:, None] * base[None, :] + 0.5 * (hi + lo)[:, None]).ravel()
    unit_w = (0.5 * (hi - lo)[:, None] * np.broadcast_to(bw, (lo.size, base.size))).ravel()
    # inner variable s' = s + (t - s) * unit, graded toward the diagonal
    sp = s_out[:, None] + (t - s_out)[:, None] * unit[None, :]
    wp = (t - s_out)[:, None] * unit_w[None, :]
    s = np.broadcast_to(s_out[:, None], sp.shape)
    w2 = w_out[:, None] * wp

    u = x / sigma
    h2 = 2.0 * H
    rho = (s ** h2 + sp ** h2 - (sp - s) ** h2) / (2.0 * (s * sp) ** H)
    rho = np.clip(rho, -1.0, 1.0)
    # split each density as (2 pi s^2H)^{-1/2} e^{-z^2/4} e^{-z^2/4} and fold
    # one half into the Hermite recurrence so high orders cannot overflow
    z_s, z_sp = u * s ** (-H), u * sp ** (-H)
    q_s = _hermite_halfweighted(nmax, z_s)
    q_sp = _hermite_halfweighted(nmax, z_sp)
    half = np.exp(-(z_s * z_s + z_sp * z_sp) / 4.0)
    core = (2.0 * w2 * half / (2.0 * np.pi * (s * sp) ** H * sigma ** 2))
    out = np.empty(nmax + 1)
    rho_n = np.ones_like(rho)
    for n in range(nmax + 1):
        out[n] = (core * q_s[n] * q_sp[n] * rho_n).sum()
        rho_n = rho_n * rho
    return out


def second_moment(n: int, x: float, t: float, H: float, sigma: float = 1.0) -> float:
    """``E h_n(x, t)^2`` by double quadrature (no sampling involved)."""
    if n < 0:
        raise ParameterError("order must be >= 0")
    return float(_second_moments_upto(n, x, t, H, sigma)[n])


def chaos_tail_bound(m: int, x: float, t: float, H: float, sigma: float = 1.0,
                     extra: int = 40) -> float:
    """Upper estimate of ``sum_{n>m} E h_n(x, t)^2``.

    Sums the explicit terms up to ``m + extra`` and closes with a geometric
    estimate on parity-paired terms (consecutive orders can vanish at
    symmetric levels, so the ratio is taken between adjacent pairs).
    """
    if m < 0:
        raise ParameterError("order must be >= 0")
    vals = _second_moments_upto(m + extra, x, t, H, sigma)[m + 1:]
    total = float(vals.sum())
    tail_pairs = vals[-2:].sum(), vals[-4:-2].sum()
    if tail_pairs[1] > 0.0 and tail_pairs[0] < tail_pairs[1]:
        r = tail_pairs[0] / tail_pairs[1]
        total += float(tail_pairs[0] * r / (1.0 - r))
    return total


def _h0_table(t_grid: np.ndarray, H: float, sigma: float, reach: float):
    """Interpolation table of h_0(x, t_k) on a dense symmetric level grid."""
    x_tab = np.linspace(-reach, reach, 2001)
    s_min = min(t_grid) * 2.0 ** -40
    nodes, weights, cuts = _time_nodes(t_grid, s_min, refine=44)
    dens = _normal_density(x_tab[:, None] / sigma, nodes[None, :] ** (2.0 * H))
    cum = np.cumsum(dens * weights[None, :] / sigma, axis=1)
    cols = np.stack([cum[:, cuts[float(t)] - 1] for t in t_grid], axis=1)
    return x_tab, cols


def sample_Wn_paths(n: int, config: SeriesConfig, threads: int = 1) -> YSample:
    """Series sampler with the order-n chaos kernel in place of the local time.

    Produces the component process ``W_n``; orders 0, 1 and 2 are the
    supported desk-scale range (higher orders work but cost the same per
    order and carry no additional checks here).
    """
    if n < 0 or n > MAX_PATHWISE_ORDER:
        raise ParameterError(f"order must be in [0, {MAX_PATHWISE_ORDER}]")
    params = config.fbm_params()
    alpha = config.alpha
    full_grid = np.asarray(config.t_grid)
    pos = full_grid > 0.0
    if not pos.any():
        return YSample(full_grid, np.zeros((config.replicates, full_grid.size)),
                       config, 0.0, False)
    t_arr = full_grid[pos]
    J = config.series_length
    pref = lepage_prefactor(alpha)
    sigma = params.sigma
    H = params.H

    reach = 6.0 * sigma * params.T ** H + 1.0
    if n == 0:
        x_tab, h0_cols = _h0_table(t_arr, H, sigma, reach)
    else:
        s_min = max(params.dt, float(t_arr.min()) * 2.0 ** -16)
        refine = max(4, int(math.ceil(math.log2(t_arr.min() / s_min))))
        nodes, weights, cuts = _time_nodes(t_arr, s_min, refine)
        cut_idx = np.array([cuts[float(t)] for t in t_arr])

    def block(rep_lo: int, rep_hi: int) -> np.ndarray:
        out = np.empty((rep_hi - rep_lo, t_arr.size))
        for r in range(rep_lo, rep_hi):
            gen = RngStream(config.seed, r).generator()
            gammas = np.cumsum(gen.exponential(1.0, J))
            g = gen.standard_normal(J)
            x = gen.standard_normal(J)
            coeff = pref * g * gammas ** (-1.0 / alpha) * np.exp(x * x / (2.0 * alpha))
            if n == 0:
                kern = np.stack(
                    [np.interp(x, x_tab, h0_cols[:, k]) for k in range(t_arr.size)],
                    axis=1)
                out[r - rep_lo] = coeff @ kern
                continue
            acc = np.zeros(t_arr.size)
            for lo in range(0, J, PATH_CHUNK):
                hi = min(lo + PATH_CHUNK, J)
                vals = _spectral_values(params, hi - lo, gen)
                pos = np.clip(nodes / params.dt, 0.0, params.N - 1)
                idx = pos.astype(int)
                frac = pos - idx
                b_nodes = vals[:, idx] * (1.0 - frac) + vals[:, idx + 1] * frac
                hv = _hermite_orthonormal(n, b_nodes / (sigma * nodes[None, :] ** H))[n]
                u = (x[lo:hi, None] / sigma) * nodes[None, :] ** (-H)
                hu = _hermite_orthonormal(n, u)[n]
                dens = _normal_density(x[lo:hi, None] / sigma, nodes[None, :] ** (2.0 * H))
                integ = np.cumsum(dens * hu * hv * weights[None, :] / sigma, axis=1)
                kern = integ[:, cut_idx - 1]
                acc += coeff[lo:hi] @ kern
            out[r - rep_lo] = acc
        return out

    R = config.replicates
    if threads <= 1 or R < 4:
        values = block(0, R)
    else:
        from concurrent.futures import ThreadPoolExecutor
        edges = np.linspace(0, R, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(block, lo, hi)
                    for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]
            values = np.concatenate([f.result() for f in futs], axis=0)
    full = np.zeros((R, full_grid.size))
    full[:, pos] = values
    return YSample(full_grid, full, config, 0.0, False)
