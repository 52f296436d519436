"""Command-line surface: experiments, verification battery, report emission.

Experiments are configured by a flat key-value JSON document (one file per
experiment); command-line ``--set key=value`` pairs override file values,
and ``--seed`` / ``--threads`` / ``--out-dir`` override their keys.  Every
artifact embeds the hash of the resolved configuration and the seed, and a
rerun with the same pair reproduces every file byte for byte (thread count
included; parallelism never changes results, only wall time).

Outputs: ``*.csv`` data files with a versioned schema comment on line one,
``report.json`` with one entry per statistical check, and an exit status of
0 iff every check passed.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParameterError
from .fbm import FbmParams, fbm_cov, generate_fbm_spectral, sample_fbm_spectral, sample_fbm_volterra
from .lepage import (
    SeriesConfig,
    YSample,
    lepage_indicator_check,
    sample_Y_paths,
    self_similarity_check,
    stationary_increments_check,
)
from .localtime import alpha_energy, estimate_local_time, scale_of_Y, scaling_check
from .reward import RewardConfig, aggregate_replicates, convergence_check, limit_constant
from .rng import RngStream
from .stable import StableParams, hurst_prime, sample_sas, stable_tail_constant
from .stats import StatReport, ecf_scale, ks_two_sample
from .chaos import expected_local_time, hermite

EXPERIMENTS = ("fbm", "localtime", "sample-y", "chaos", "reward", "verify")


class UsageError(Exception):
    """Bad invocation or configuration; the message names the failing field."""


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    threads: int = 1
    out_dir: str = "lfsm-out"
    params: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        flat = {"experiment": self.experiment, "seed": self.seed,
                "threads": self.threads, "out_dir": self.out_dir}
        flat.update(self.params)
        return flat

    def hash(self) -> str:
        # threads and out_dir do not affect results, keep them out of the hash
        flat = {k: v for k, v in self.resolved().items() if k not in ("threads", "out_dir")}
        blob = json.dumps(flat, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


DEFAULTS: dict = {
    "fbm": {"H": 0.7, "sigma2": 1.0, "N": 1024, "T": 1.0, "n_paths": 1024,
            "method": "spectral", "csv_paths": 4},
    "localtime": {"H": 0.5, "N": 4096, "T": 1.0, "occupation_tolerance": 0.02},
    "sample-y": {"alpha": 1.5, "H": 0.5, "replicates": 500, "J": 0,
                 "t_grid": [0.25, 0.5, 1.0, 2.0], "scale_mc": 2000, "level": 0.01},
    "chaos": {"H": 0.5, "N": 4096, "t": 1.0, "m_max": 8, "x_max": 2.0, "nx": 41},
    "reward": {"alpha": 1.5, "ladder": [[100, 100], [300, 300]], "replicates": 400,
               "t_grid": [0.5, 1.0], "limit_replicates": 800, "limit_J": 1000,
               "level": 0.01},
    "verify": {"indicator_n": 4000, "indicator_J": 2000, "levy_paths": 1200,
               "levy_steps": 4096, "scaling_mc": 1200, "cross_paths": 2000,
               "y_replicates": 600, "y_J": 1000, "reward_users": 300,
               "reward_replicates": 400, "level": 0.01},
}


def load_config(experiment: str, seed: int, threads: int, out_dir: str,
                config_file: str | None, overrides: dict) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise UsageError(f"unknown experiment kind: {experiment!r}")
    params = dict(DEFAULTS[experiment])
    if config_file:
        try:
            loaded = json.loads(Path(config_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config: cannot read {config_file}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config: document must be a flat JSON object")
        kind = loaded.pop("experiment", experiment)
        if kind not in (experiment, "verify-all" if experiment == "verify" else experiment):
            raise UsageError(f"config: experiment field {kind!r} does not match {experiment!r}")
        seed = int(loaded.pop("seed", seed))
        threads = int(loaded.pop("threads", threads))
        out_dir = str(loaded.pop("out_dir", out_dir))
        for key, value in loaded.items():
            if key not in params:
                raise UsageError(f"config: unknown field {key!r} for {experiment}")
            params[key] = value
    for key, value in overrides.items():
        if key == "seed":
            seed = int(value)
        elif key == "threads":
            threads = int(value)
        elif key == "out_dir":
            out_dir = str(value)
        elif key in params:
            params[key] = type(params[key])(json.loads(value)) if isinstance(
                params[key], (list, dict)) else _coerce(params[key], value)
        else:
            raise UsageError(f"--set: unknown field {key!r} for {experiment}")
    return ExperimentConfig(experiment, seed, threads, out_dir, params)


def _coerce(template, value: str):
    if isinstance(template, bool):
        return value.lower() in ("1", "true", "yes")
    return type(template)(value)


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def _csv_header(schema: str, cfg: ExperimentConfig) -> str:
    return f"# lfsm-csv v1 schema={schema} config={cfg.hash()} seed={cfg.seed}\n"


def _write(out: Path, name: str, schema: str, cfg: ExperimentConfig, body: str) -> None:
    (out / name).write_text(_csv_header(schema, cfg) + body)


def _emit(out: Path, cfg: ExperimentConfig, reports: list[StatReport]) -> None:
    doc = {
        "package_version": __version__,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "config": {k: v for k, v in cfg.resolved().items() if k not in ("threads", "out_dir")},
        "reports": [r.to_dict() for r in reports],
        "all_passed": all(r.passed for r in reports),
    }
    (out / "report.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _run_fbm(cfg: ExperimentConfig, out: Path) -> list[StatReport]:
    p = cfg.params
    params = FbmParams(H=float(p["H"]), sigma2=float(p["sigma2"]), N=int(p["N"]), T=float(p["T"]))
    n_paths = int(p["n_paths"])
    rng = RngStream(cfg.seed)
    if p["method"] == "spectral":
        values = sample_fbm_spectral(params, n_paths, rng)
    elif p["method"] == "volterra":
        values = sample_fbm_volterra(params, n_paths, rng)
    else:
        raise UsageError(f"method: unknown generator {p['method']!r}")
    times = params.times()
    for i in range(min(n_paths, int(p["csv_paths"]))):
        buf = io.StringIO()
        buf.write("t,value\n")
        for t, v in zip(times, values[i]):
            buf.write(f"{t!r},{v!r}\n")
        _write(out, f"fbm_path_{i:03d}.csv", "fbm-path(t,value)", cfg, buf.getvalue())
    var = values[:, -1].var(ddof=1)
    target = params.sigma2 * params.T ** (2 * params.H)
    tol = 3.0 * math.sqrt(2.0 / (n_paths - 1))
    report = StatReport(
        name="terminal variance vs self-similar target",
        statistics={"var": var, "target": target, "ratio": var / target},
        threshold={"ratio_tolerance": tol},
        passed=abs(var / target - 1.0) <= tol,
        provenance={"config": cfg.hash(), "seed": cfg.seed, "method": p["method"]},
    )
    return [report]


def _run_localtime(cfg: ExperimentConfig, out: Path) -> list[StatReport]:
    p = cfg.params
    params = FbmParams(H=float(p["H"]), N=int(p["N"]), T=float(p["T"]))
    path = generate_fbm_spectral(params, RngStream(cfg.seed))
    t_grid = np.asarray([0.25, 0.5, 0.75, 1.0]) * params.T
    fld = estimate_local_time(path, t_grid=t_grid)
    buf = io.StringIO()
    fld.to_csv(buf)
    _write(out, "localtime_field.csv", "localtime(x,t,value)", cfg, buf.getvalue())
    occ = [abs(fld.dx * (fld.values[:, k].sum()
                         - 0.5 * (fld.values[0, k] + fld.values[-1, k])) - t) / t
           for k, t in enumerate(t_grid)]
    tol = float(p["occupation_tolerance"])
    mono = bool(np.all(np.diff(fld.values, axis=1) >= -1e-12))
    reports = [
        StatReport("occupation identity", {"worst_relative_error": max(occ)},
                   {"relative_error": tol}, max(occ) <= tol,
                   {"config": cfg.hash(), "seed": cfg.seed}),
        StatReport("monotone in t", {"monotone": mono}, {"monotone": True}, mono,
                   {"config": cfg.hash(), "seed": cfg.seed}),
    ]
    return reports


def _run_sample_y(cfg: ExperimentConfig, out: Path) -> list[StatReport]:
    p = cfg.params
    alpha, H = float(p["alpha"]), float(p["H"])
    t_grid = tuple(float(t) for t in p["t_grid"])
    j = int(p["J"]) or None
    series = SeriesConfig(alpha=alpha, H=H, t_grid=t_grid,
                          replicates=int(p["replicates"]), J=j, seed=cfg.seed)
    sample = sample_Y_paths(series, threads=cfg.threads)
    buf = io.StringIO()
    sample.to_csv(buf)
    _write(out, "y_sample.csv", "ysample(replicate,t,value)", cfg, buf.getvalue())

    t_ref = min(t_grid, key=lambda t: abs(t - 1.0))
    scale, scale_se = scale_of_Y(alpha, H, t_ref, int(p["scale_mc"]),
                                 RngStream(cfg.seed, 9000), fbm=series.fbm_params(),
                                 bandwidth=series.eps())
    oracle = sample_sas(StableParams(alpha, scale), 100_000, RngStream(cfg.seed, 9001))
    d, pv = ks_two_sample(sample.column(t_ref), oracle)
    level = float(p["level"])
    reports = [StatReport(
        "marginal law vs direct stable oracle",
        {"t": t_ref, "ks_distance": d, "p_value": pv, "oracle_scale": scale,
         "oracle_scale_se": scale_se,
         "truncation_tail_share": sample.truncation_fraction,
         "under_truncated": sample.under_truncated},
        {"p_value": level}, pv > level,
        {"config": cfg.hash(), "seed": cfg.seed},
    )]
    summary = {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "scales": {},
        "truncation_tail_share": sample.truncation_fraction,
    }
    for t in t_grid:
        if t > 0:
            s, se = ecf_scale(sample.column(t), alpha)
            summary["scales"][repr(t)] = [s, se]
    (out / "y_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return reports


def _run_chaos(cfg: ExperimentConfig, out: Path) -> list[StatReport]:
    from .chaos import chaos_terms
    p = cfg.params
    params = FbmParams(H=float(p["H"]), N=int(p["N"]), T=max(1.0, float(p["t"])))
    path = generate_fbm_spectral(params, RngStream(cfg.seed))
    x_grid = np.linspace(-float(p["x_max"]), float(p["x_max"]), int(p["nx"]))
    terms = chaos_terms(path, int(p["m_max"]), x_grid, float(p["t"]))
    buf = io.StringIO()
    buf.write("n,x,value\n")
    for n in range(terms.shape[0]):
        for i, x in enumerate(x_grid):
            buf.write(f"{n},{x!r},{terms[n, i]!r}\n")
    _write(out, "chaos_field.csv", "chaos(n,x,value)", cfg, buf.getvalue())
    h0 = expected_local_time(0.0, 1.0, 0.5, 1.0)
    target = math.sqrt(2.0 / math.pi)
    herm_ok = hermite(2, 0.0) == -0.5 and hermite(1, 1.0) == 1.0
    reports = [
        StatReport("mean local time closed form (H=1/2)",
                   {"value": h0, "target": target, "error": abs(h0 - target)},
                   {"abs_error": 1e-9}, abs(h0 - target) <= 1e-9,
                   {"config": cfg.hash(), "seed": cfg.seed}),
        StatReport("hermite normalization", {"ok": herm_ok}, {"ok": True}, herm_ok,
                   {"config": cfg.hash(), "seed": cfg.seed}),
    ]
    return reports


def _run_reward(cfg: ExperimentConfig, out: Path) -> list[StatReport]:
    p = cfg.params
    alpha = float(p["alpha"])
    t_grid = tuple(float(t) for t in p["t_grid"])
    ladder = [RewardConfig(alpha=alpha, n_users=int(n), b=int(b), t_grid=t_grid,
                           seed=cfg.seed + 101 + k)
              for k, (n, b) in enumerate(p["ladder"])]
    limit_grid = tuple(sorted({t for t in t_grid if t > 0.0}))
    limit_cfg = SeriesConfig(alpha=alpha, H=0.5, t_grid=limit_grid,
                             replicates=int(p["limit_replicates"]),
                             J=int(p["limit_J"]), seed=cfg.seed + 100)
    limit = sample_Y_paths(limit_cfg, threads=cfg.threads)
    report = convergence_check(ladder, limit, int(p["replicates"]),
                               level=float(p["level"]), threads=cfg.threads)
    buf = io.StringIO()
    buf.write("rung_index,n_users,b,t,ks_distance\n")
    dists = report.statistics["ks_distances"]
    for k, cfg_r in enumerate(ladder):
        for t in limit_grid:
            buf.write(f"{k},{cfg_r.n_users},{cfg_r.b},{t!r},{dists[repr(t)][k]!r}\n")
    _write(out, "reward_ladder.csv", "reward-ladder(rung,n,b,t,ks)", cfg, buf.getvalue())
    summary = {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "limit_constant": limit_constant(alpha),
        "sigma_w": 2.0 ** (-1.0 / alpha),
        "final_p_values": report.statistics["final_p_values"],
    }
    (out / "reward_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return [report]


def _run_verify(cfg: ExperimentConfig, out: Path) -> list[StatReport]:
    p = cfg.params
    level = float(p["level"])
    reports: list[StatReport] = []
    prov = {"config": cfg.hash(), "seed": cfg.seed}

    # constants against closed forms
    worst = 0.0
    for a in (0.25, 0.5, 0.75, 1.25, 1.5, 1.75):
        from scipy.special import gamma as gamma_fn
        closed = 1.0 / (gamma_fn(1.0 - a) * math.cos(math.pi * a / 2.0))
        worst = max(worst, abs(stable_tail_constant(a) - closed) / abs(closed))
    dirichlet = abs(stable_tail_constant(1.0) - 2.0 / math.pi)
    reports.append(StatReport(
        "stable tail constant vs closed forms",
        {"worst_relative_error": worst, "alpha1_abs_error": dirichlet},
        {"relative_error": 1e-8, "alpha1_abs_error": 1e-6},
        worst <= 1e-8 and dirichlet <= 1e-6, prov))

    # series normalization oracle and its negative control
    ind = lepage_indicator_check(1.0, int(p["indicator_J"]), int(p["indicator_n"]),
                                 RngStream(cfg.seed, 1), level=level)
    ind.provenance.update(prov)
    reports.append(ind)
    neg = lepage_indicator_check(1.0, int(p["indicator_J"]), int(p["indicator_n"]),
                                 RngStream(cfg.seed, 2), prefactor_multiplier=2.0,
                                 level=level)
    reports.append(StatReport(
        "series normalization negative control (x2 prefactor)",
        neg.statistics, {"p_value_below": level}, neg.statistics["p_value"] < level, prov))

    # generator cross-validation at the terminal point
    params = FbmParams(H=0.7, N=1024, T=1.0)
    n_cross = int(p["cross_paths"])
    b_spec = sample_fbm_spectral(params, n_cross, RngStream(cfg.seed, 3))[:, -1]
    b_vol = sample_fbm_volterra(params, n_cross, RngStream(cfg.seed, 4))[:, -1]
    d, pv = ks_two_sample(b_spec, b_vol)
    reports.append(StatReport(
        "fbm generators cross-method KS",
        {"ks_distance": d, "p_value": pv}, {"p_value": level}, pv > level, prov))

    # local time vs the reflection oracle at the origin
    lt_params = FbmParams(H=0.5, N=int(p["levy_steps"]), T=1.0)
    npaths = int(p["levy_paths"])
    vals = sample_fbm_spectral(lt_params, npaths, RngStream(cfg.seed, 5))
    from .localtime import default_bandwidth, level_counts_batch
    eps = default_bandwidth(lt_params)
    lt0 = level_counts_batch(vals, np.zeros(npaths), lt_params.dt, eps,
                             np.array([1.0]), lt_params.N)[:, 0]
    refl = np.abs(RngStream(cfg.seed, 6).generator().standard_normal(50_000))
    d, pv = ks_two_sample(lt0, refl)
    reports.append(StatReport(
        "local time at 0 vs reflection oracle",
        {"ks_distance": d, "p_value": pv}, {"p_value": level}, pv > level, prov))

    # diffusive rescaling of the local time
    sc = scaling_check(0.5, 4.0, int(p["scaling_mc"]), RngStream(cfg.seed, 7),
                       n_steps=int(p["levy_steps"]), level=level)
    sc.provenance.update(prov)
    reports.append(sc)

    # series sampler marginal vs direct oracle, plus shape checks on the grid
    series = SeriesConfig(alpha=1.5, H=0.5, t_grid=(0.25, 0.5, 1.0, 1.5, 2.0),
                          replicates=int(p["y_replicates"]), J=int(p["y_J"]),
                          seed=cfg.seed + 50)
    sample = sample_Y_paths(series, threads=cfg.threads)
    scale, _ = scale_of_Y(1.5, 0.5, 1.0, 3000, RngStream(cfg.seed, 8),
                          fbm=series.fbm_params(), bandwidth=series.eps())
    oracle = sample_sas(StableParams(1.5, scale), 100_000, RngStream(cfg.seed, 9))
    d, pv = ks_two_sample(sample.column(1.0), oracle)
    reports.append(StatReport(
        "series marginal vs direct stable oracle",
        {"ks_distance": d, "p_value": pv, "oracle_scale": scale},
        {"p_value": level}, pv > level, prov))
    ss = self_similarity_check(sample)
    ss.provenance.update(prov)
    reports.append(ss)
    base = sample_Y_paths(SeriesConfig(alpha=1.5, H=0.5, t_grid=(1.0,),
                                       replicates=int(p["y_replicates"]),
                                       J=int(p["y_J"]), seed=cfg.seed + 51),
                          threads=cfg.threads)
    st = stationary_increments_check(sample, base, 1.0, 0.5, level=level)
    st.provenance.update(prov)
    reports.append(st)

    # reward scheme final rung against the scaled limit
    n_b = int(p["reward_users"])
    rung = RewardConfig(alpha=1.5, n_users=n_b, b=n_b, t_grid=(0.5, 1.0),
                        seed=cfg.seed + 60)
    limit_cfg = SeriesConfig(alpha=1.5, H=0.5, t_grid=(0.5, 1.0),
                             replicates=int(p["y_replicates"]), J=int(p["y_J"]),
                             seed=cfg.seed + 61)
    limit = sample_Y_paths(limit_cfg, threads=cfg.threads)
    conv = convergence_check([rung], limit, int(p["reward_replicates"]),
                             level=level, threads=cfg.threads)
    conv.provenance.update(prov)
    reports.append(conv)
    control = convergence_check([rung], limit, int(p["reward_replicates"]),
                                include_constant=False, level=level, threads=cfg.threads)
    reports.append(StatReport(
        "reward limit-scale negative control",
        control.statistics, {"final_p_below": level},
        all(v < level for v in control.statistics["final_p_values"].values()), prov))

    buf = io.StringIO()
    buf.write("check,passed\n")
    for r in reports:
        buf.write(f"{r.name!r},{int(r.passed)}\n")
    _write(out, "verify_index.csv", "verify(check,passed)", cfg, buf.getvalue())
    return reports


RUNNERS = {
    "fbm": _run_fbm,
    "localtime": _run_localtime,
    "sample-y": _run_sample_y,
    "chaos": _run_chaos,
    "reward": _run_reward,
    "verify": _run_verify,
}


def run_experiment(config: ExperimentConfig) -> list[StatReport]:
    """Execute one experiment; writes artifacts and returns its reports."""
    if config.experiment not in RUNNERS:
        raise UsageError(f"unknown experiment kind: {config.experiment!r}")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        reports = RUNNERS[config.experiment](config, out)
    except ParameterError as exc:
        raise UsageError(str(exc)) from exc
    _emit(out, config, reports)
    return reports


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lfsm",
        description="Simulate and statistically verify local-time fractional stable motions.",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out-dir", default="lfsm-out")
    parser.add_argument("--config", default=None, help="flat JSON config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field (repeatable)")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    args = parser.parse_args(argv)

    overrides = {}
    for item in args.set:
        if "=" not in item:
            print(f"lfsm: --set needs KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        key, value = item.split("=", 1)
        overrides[key] = value
    try:
        config = load_config(args.experiment, args.seed, args.threads,
                             args.out_dir, args.config, overrides)
        reports = run_experiment(config)
    except UsageError as exc:
        print(f"lfsm: {exc}", file=sys.stderr)
        return 2
    for r in reports:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}")
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
