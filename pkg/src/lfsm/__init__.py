"""Simulation and statistical verification of local-time fractional stable
motions: stable-law primitives, fractional Brownian motion synthesis,
occupation-density estimation, a shot-noise series sampler, the chaos
decomposition of local times, and the many-user random-reward scheme whose
scaled aggregate converges to the same limit.  Every construction is
cross-validated against an independent route; see the README for the map.
"""

__version__ = "0.1.0"

from .errors import DiagnosticError, NumericalError, ParameterError
from .rng import RngStream
from .stable import (
    FeasibilityReport,
    StableParams,
    gaussian_abs_moment,
    hurst_prime,
    lepage_prefactor,
    sample_pareto_rewards,
    sample_sas,
    stable_tail_constant,
    validate_pair,
)
from .fbm import (
    FbmParams,
    FbmPath,
    VolterraGrid,
    fbm_cov,
    generate_fbm_spectral,
    generate_fbm_volterra,
    kernel_KH,
    kernel_norm_constant,
)
from .localtime import (
    HolderStatistic,
    LocalTimeField,
    alpha_energy,
    estimate_local_time,
    holder_modulus,
    level_local_time,
    scale_of_Y,
    scaling_check,
)
from .lepage import (
    SeriesConfig,
    YSample,
    distinctness_check_alpha1,
    holder_estimate_Y,
    lepage_indicator_check,
    sample_Y_paths,
    self_similarity_check,
    stationary_increments_check,
)
from .chaos import (
    ChaosConfig,
    ChaosField,
    chaos_tail_bound,
    chaos_term,
    expected_local_time,
    hermite,
    reconstruct_local_time,
    sample_Wn_paths,
    second_moment,
)
from .reward import (
    RewardConfig,
    RewardEnsemble,
    VisitCounts,
    WalkPath,
    aggregate_scaled,
    convergence_check,
    simulate_walk,
    user_reward,
    visit_counts,
)
from .stats import EmpiricalDistribution, StatReport, ecf_scale, ks_two_sample, loglog_slope
