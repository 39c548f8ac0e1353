"""Private and robust multi-armed bandits.

Heavy-tailed reward environments under Huber-style contamination, two
truncation-based epsilon-DP mean estimators, a batched arm-elimination
algorithm built on them, and a Monte-Carlo verification harness.
"""

from .bandit import (
    BatchRecord,
    RegretTrace,
    clean_regret,
    dprse_baseline_run,
    eliminate_arms,
    prae_run,
)
from .env import (
    BanditInstance,
    ContaminationSpec,
    Gaussian,
    InlierSpec,
    ParetoShifted,
    PointMass,
    StudentTShifted,
    TwoPoint,
    make_hard_instance,
    make_linear_means_instance,
    sample_reward,
    sample_rewards,
)
from .estimators import (
    CENTRAL_BREAKDOWN,
    CENTRAL_RADIUS_CONSTANT,
    Estimate,
    PrmCentralParams,
    PrmRawParams,
    central_schedule,
    private_histogram,
    prm_central,
    prm_raw,
    raw_schedule,
    truncated_mean,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    emit_csv,
    parse_config,
    run_experiment,
    serialize_config,
)
from .privacy import (
    PrivacyParams,
    audit_sensitivity,
    laplace_sample,
    laplace_samples,
    noiseless,
    release_hook,
    truncated_mean_sensitivity,
)
from .rng import RngStream, derive_stream_id

__all__ = [
    "BanditInstance",
    "BatchRecord",
    "CENTRAL_BREAKDOWN",
    "CENTRAL_RADIUS_CONSTANT",
    "ConfigError",
    "ContaminationSpec",
    "Estimate",
    "ExperimentConfig",
    "Gaussian",
    "InlierSpec",
    "ParetoShifted",
    "PointMass",
    "PrivacyParams",
    "PrmCentralParams",
    "PrmRawParams",
    "RegretTrace",
    "RngStream",
    "StudentTShifted",
    "TwoPoint",
    "audit_sensitivity",
    "central_schedule",
    "clean_regret",
    "derive_stream_id",
    "dprse_baseline_run",
    "eliminate_arms",
    "emit_csv",
    "laplace_sample",
    "laplace_samples",
    "make_hard_instance",
    "make_linear_means_instance",
    "noiseless",
    "parse_config",
    "prae_run",
    "private_histogram",
    "prm_central",
    "prm_raw",
    "raw_schedule",
    "release_hook",
    "run_experiment",
    "sample_reward",
    "sample_rewards",
    "serialize_config",
    "truncated_mean",
    "truncated_mean_sensitivity",
]

__version__ = "0.1.0"
