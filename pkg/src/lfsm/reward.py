"""Many-user random-reward scheme and its convergence to the stable limit.

Each user runs an independent mean-zero unit-variance integer random walk
(simple +/-1 steps here, the minimal law satisfying those constraints) and
earns a heavy-tailed reward ``W_j`` every time the walk visits site j; the
reward attached to a site is drawn once and reused on revisits.  The scaled
aggregate over n users with per-user horizon b,

    ``A(t) = (n b^{(alpha+1)/2})^{-1/alpha} sum_i R_i(b t)``,

converges weakly (as both n and b grow) to ``(2 / C_alpha)^{1/alpha}
sigma_W Y(t)`` where Y is the local-time fractional stable motion built on
Brownian (H = 1/2) local times, ``C_alpha`` the stable tail constant and
``sigma_W`` the reward tail weight.  The convergence check compares the
finite-dimensional marginals of the aggregate against a sampler of Y along
a ladder of (n, b) sizes; tightness is not a testable statement at desk
scale and is out of scope.

Rewards are materialized per replicate over the contiguous range of visited
sites (for +/-1 walks every site between the running min and max is visited,
so the range is exactly the visited set, O(sqrt(b)) wide).  All draws for a
replicate come from ``RngStream(seed, replicate_index)`` in a fixed order,
which keeps ensembles bit-identical under any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ParameterError
from .lepage import YSample
from .rng import RngStream
from .stable import pareto_sigma_w, stable_tail_constant
from .stats import StatReport, ks_two_sample

__all__ = [
    "RewardConfig",
    "WalkPath",
    "VisitCounts",
    "RewardEnsemble",
    "simulate_walk",
    "visit_counts",
    "user_reward",
    "aggregate_scaled",
    "aggregate_replicates",
    "limit_constant",
    "convergence_check",
]


@dataclass(frozen=True)
class RewardConfig:
    alpha: float
    n_users: int
    b: int
    t_grid: tuple
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ParameterError(f"alpha must be in (0, 2), got {self.alpha}")
        if self.n_users < 1 or self.b < 1:
            raise ParameterError("n_users and b must be >= 1")
        t = tuple(float(v) for v in self.t_grid)
        if len(t) < 1 or min(t) < 0.0 or max(t) > 1.0:
            raise ParameterError("t_grid must be nonempty inside [0, 1]")
        object.__setattr__(self, "t_grid", t)


@dataclass(frozen=True)
class WalkPath:
    """Positions ``S_0 = 0, S_1, ..., S_b`` of one +/-1 random walk."""

    positions: np.ndarray

    @property
    def b(self) -> int:
        return self.positions.size - 1


@dataclass(frozen=True)
class VisitCounts:
    """Site occupation of one walk at a (possibly fractional) time.

    ``counts[j]`` is the number of steps ``1 <= k <= t`` with ``S_k = j``,
    interpolated linearly in t between integers; the starting point S_0 is
    not counted, so the counts sum to t exactly for integer t.
    """

    counts: dict
    t: float

    def at(self, site: int) -> float:
        return self.counts.get(int(site), 0.0)

    def total(self) -> float:
        return float(sum(self.counts.values()))


def simulate_walk(b: int, rng: RngStream) -> WalkPath:
    if b < 1:
        raise ParameterError(f"b must be >= 1, got {b}")
    gen = rng.generator()
    steps = gen.integers(0, 2, b, dtype=np.int64) * 2 - 1
    pos = np.empty(b + 1, dtype=np.int64)
    pos[0] = 0
    np.cumsum(steps, out=pos[1:])
    return WalkPath(pos)


def visit_counts(walk: WalkPath, t: float) -> VisitCounts:
    if not 0.0 <= t <= walk.b:
        raise ParameterError(f"t must be in [0, {walk.b}], got {t}")
    m = int(math.floor(t))
    frac = t - m
    counts: dict = {}
    for site in walk.positions[1: m + 1]:
        counts[int(site)] = counts.get(int(site), 0.0) + 1.0
    if frac > 0.0:
        nxt = int(walk.positions[m + 1])
        counts[nxt] = counts.get(nxt, 0.0) + frac
    return VisitCounts(counts, float(t))


def user_reward(walk: WalkPath, reward_map: Mapping, t_grid) -> np.ndarray:
    """Cumulative reward ``R(b t_k) = sum_j W_j phi(j, b t_k)`` for t_k in [0, 1].

    ``reward_map`` must yield the reward of every visited site; the lookup
    is by integer site.
    """
    t_arr = np.asarray(t_grid, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise ParameterError("t_grid must lie in [0, 1]")
    per_step = np.array([reward_map[int(s)] for s in walk.positions[1:]])
    cum = np.concatenate([[0.0], np.cumsum(per_step)])
    tau = t_arr * walk.b
    lo = np.minimum(tau.astype(int), walk.b - 1)
    frac = tau - lo
    return cum[lo] + frac * (cum[lo + 1] - cum[lo])


@dataclass(frozen=True)
class RewardEnsemble:
    """One realization of the scheme: scaled aggregate and, optionally, the
    per-user reward paths it was built from."""

    t_grid: np.ndarray
    aggregate: np.ndarray
    sigma_w: float
    config: RewardConfig
    user_paths: np.ndarray | None = None


def _replicate_aggregate(config: RewardConfig, replicate: int,
                         keep_users: bool = False):
    gen = RngStream(config.seed, replicate).generator()
    n, b = config.n_users, config.b
    t_arr = np.asarray(config.t_grid)
    steps = gen.integers(0, 2, (n, b), dtype=np.int8) * 2 - 1
    pos = np.cumsum(steps, axis=1, dtype=np.int32)
    width = int(np.abs(pos).max())
    signs = gen.integers(0, 2, (n, 2 * width + 1), dtype=np.int8) * 2 - 1
    site_rewards = signs * gen.uniform(0.0, 1.0, (n, 2 * width + 1)) ** (-1.0 / config.alpha)
    per_step = np.take_along_axis(site_rewards, pos + width, axis=1)
    cum = np.concatenate([np.zeros((n, 1)), np.cumsum(per_step, axis=1)], axis=1)
    tau = t_arr * b
    lo = np.minimum(tau.astype(int), b - 1)
    frac = tau - lo
    users = cum[:, lo] + frac[None, :] * (cum[:, lo + 1] - cum[:, lo])
    norm = (n * float(b) ** ((config.alpha + 1.0) / 2.0)) ** (-1.0 / config.alpha)
    agg = norm * users.sum(axis=0)
    return (agg, users) if keep_users else (agg, None)


def aggregate_scaled(config: RewardConfig, replicate: int = 0,
                     keep_users: bool = False) -> RewardEnsemble:
    """Scaled aggregate reward path of one replicate of the scheme."""
    agg, users = _replicate_aggregate(config, replicate, keep_users)
    return RewardEnsemble(np.asarray(config.t_grid), agg, pareto_sigma_w(config.alpha),
                          config, users)


def aggregate_replicates(config: RewardConfig, replicates: int,
                         threads: int = 1) -> np.ndarray:
    """(replicates, nt) independent scaled aggregates; replicate r uses
    ``RngStream(seed, r)``, so the result does not depend on ``threads``."""
    nt = len(config.t_grid)
    out = np.empty((replicates, nt))

    def block(lo, hi):
        for r in range(lo, hi):
            out[r] = _replicate_aggregate(config, r)[0]

    if threads <= 1 or replicates < 4:
        block(0, replicates)
    else:
        edges = np.linspace(0, replicates, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(block, lo, hi)
                    for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]
            for f in futs:
                f.result()
    return out


def limit_constant(alpha: float) -> float:
    """``(2 / C_alpha)^{1/alpha} sigma_W`` relating the aggregate to Y."""
    return (2.0 / stable_tail_constant(alpha)) ** (1.0 / alpha) * pareto_sigma_w(alpha)


def convergence_check(ladder: Sequence[RewardConfig], limit: YSample, replicates: int,
                      include_constant: bool = True, level: float = 0.01,
                      threads: int = 1) -> StatReport:
    """Distributional convergence of the aggregate along a ladder of sizes.

    At every grid time, the KS distances between the rung aggregates and the
    (constant-scaled) limit sample must be nonincreasing in the rung index,
    and the final rung must pass at ``level``.  ``include_constant=False``
    drops the ``(2/C_alpha)^{1/alpha} sigma_W`` factor and is the scale
    negative control.
    """
    if not ladder:
        raise ParameterError("ladder must be nonempty")
    alpha = ladder[0].alpha
    t_grid = ladder[0].t_grid
    for cfg in ladder:
        if cfg.alpha != alpha or cfg.t_grid != t_grid:
            raise ParameterError("ladder entries must share alpha and t_grid")
    factor = limit_constant(alpha) if include_constant else 1.0
    targets = {t: factor * limit.column(t) for t in t_grid if t > 0.0}

    distances = {t: [] for t in targets}
    final_p = {}
    for k, cfg in enumerate(ladder):
        agg = aggregate_replicates(cfg, replicates, threads=threads)
        for j, t in enumerate(t_grid):
            if t not in targets:
                continue
            d, p = ks_two_sample(agg[:, j], targets[t])
            distances[t].append(d)
            if k == len(ladder) - 1:
                final_p[t] = p
    monotone = all(
        all(distances[t][i] >= distances[t][i + 1] for i in range(len(distances[t]) - 1))
        for t in targets
    )
    final_ok = all(p > level for p in final_p.values())
    return StatReport(
        name="reward-scheme convergence",
        statistics={
            "rungs": [(c.n_users, c.b) for c in ladder],
            "ks_distances": {repr(t): distances[t] for t in targets},
            "final_p_values": {repr(t): final_p[t] for t in final_p},
            "limit_constant": factor,
        },
        threshold={"p_value": level, "monotone": True},
        passed=monotone and final_ok,
        provenance={"alpha": alpha, "replicates": replicates,
                    "seeds": [c.seed for c in ladder]},
    )
