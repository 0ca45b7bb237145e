"""Classical simulation of iterative quantum amplitude estimation and its bias."""

__version__ = "0.1.0"

from .engine import (
    IqaeConfig,
    RoundExit,
    RoundLimitExceeded,
    RoundTrace,
    RunResult,
    find_next_k,
    mitigated_estimate,
    run_iqae,
    run_mitigated,
    run_round,
)
from .estimation import (
    ConfidenceInterval,
    Domain,
    RoundParams,
    ci_from_counts,
    f_fin,
    gamma,
    grover_amplitude,
    hoeffding_halfwidth,
    k_max,
    max_shots,
    round_alpha,
    theta_of_amplitude,
)
from .sampler import BernoulliOracle, QueryLedger, SeedPlan, derive_stream, sample_shots
