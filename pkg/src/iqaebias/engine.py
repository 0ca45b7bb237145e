"""Modified IQAE: the round loop, next-Grover-number search, and final-round re-execution.

This is the reference implementation. It works with any
:class:`~iqaebias.sampler.AmplitudeOracle` and records a full trace of every
round. Campaigns over the Bernoulli backend use :mod:`iqaebias._kernel`,
which is tested to reproduce this module bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .estimation import (
    HALF_PI,
    ConfidenceInterval,
    Domain,
    _ci_raw,
    _find_next_k,
    _gamma,
    f_fin,
    k_max,
    max_shots,
    round_alpha,
)
from .sampler import AmplitudeOracle, QueryLedger, sample_shots


class RoundLimitExceeded(RuntimeError):
    """The run used ``max_rounds`` rounds without terminating."""


@dataclass(frozen=True)
class IqaeConfig:
    epsilon: float = 1e-3
    alpha: float = 0.05
    n_shot: int = 1
    r_min: float = 2.0
    max_rounds: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_shot < 1:
            raise ValueError(f"n_shot must be positive, got {self.n_shot}")
        if not self.r_min > 1.0:
            raise ValueError(f"r_min must exceed 1, got {self.r_min}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be positive, got {self.max_rounds}")

    @property
    def k_max(self) -> float:
        return k_max(self.epsilon)

    @property
    def zero_width_cap(self) -> int:
        """Largest K considered when the angle interval has collapsed to a point."""
        return 2 * math.ceil(self.k_max) + 1

    def alpha_for(self, K: int) -> float:
        return round_alpha(K, self.k_max, self.alpha)

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "n_shot": self.n_shot,
            "r_min": self.r_min,
            "max_rounds": self.max_rounds,
        }


class RoundExit(enum.Enum):
    TERMINATED = "terminated"
    NEXT_K = "next_k"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class RoundTrace:
    index: int
    k: int
    R: int
    alpha_i: float
    n_max: int
    shots: int
    hits: int
    a_hat_k: float
    a_hat: float
    ci_theta: ConfidenceInterval
    ci_a: ConfidenceInterval
    delta_a: float
    grover_calls: int
    exit: RoundExit
    k_next: int | None = None

    @property
    def K(self) -> int:
        return 2 * self.k + 1

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "k": self.k,
            "R": self.R,
            "alpha_i": self.alpha_i,
            "n_max": self.n_max,
            "shots": self.shots,
            "hits": self.hits,
            "a_hat_k": self.a_hat_k,
            "a_hat": self.a_hat,
            "theta_lo": self.ci_theta.lo,
            "theta_hi": self.ci_theta.hi,
            "a_lo": self.ci_a.lo,
            "a_hi": self.ci_a.hi,
            "delta_a": self.delta_a,
            "grover_calls": self.grover_calls,
            "exit": self.exit.value,
            "k_next": self.k_next,
        }


@dataclass(frozen=True)
class RunResult:
    a_hat: float
    rounds: list[RoundTrace]
    total_grover_calls: int
    state_preparations: int
    mitigated: bool = False
    # set by run_mitigated: output of the plain run and hits of the extra round
    plain_a_hat: float | None = None
    rerun_hits: int | None = None
    # known only to a harness that holds the true amplitude
    success: bool | None = None
    f_fin: float | None = None

    @property
    def final(self) -> RoundTrace:
        return self.rounds[-1]

    @property
    def k_fin(self) -> int:
        return self.final.k

    @property
    def N_fin(self) -> int:
        return self.final.shots

    @property
    def R_fin(self) -> int:
        return self.final.R

    @property
    def final_round_grover_calls(self) -> int:
        return self.final.grover_calls

    def with_truth(self, a: float, epsilon: float) -> RunResult:
        return replace(self, success=abs(self.a_hat - a) <= epsilon, f_fin=f_fin(a, self.k_fin))

    def as_dict(self) -> dict:
        return {
            "a_hat": self.a_hat,
            "success": self.success,
            "k_fin": self.k_fin,
            "N_fin": self.N_fin,
            "R_fin": self.R_fin,
            "f_fin": self.f_fin,
            "total_grover_calls": self.total_grover_calls,
            "final_round_grover_calls": self.final_round_grover_calls,
            "state_preparations": self.state_preparations,
            "mitigated": self.mitigated,
            "plain_a_hat": self.plain_a_hat,
            "rerun_hits": self.rerun_hits,
            "rounds": [r.as_dict() for r in self.rounds],
        }


def find_next_k(k_i: int, theta_lo: float, theta_hi: float, r_min: float,
                zero_width_cap: int | None = None) -> int:
    """Largest admissible next Grover number keeping ``[K theta_lo, K theta_hi]`` in one quadrant.

    Returns ``k_i`` when no odd ``K >= r_min (2 k_i + 1)`` qualifies.
    ``zero_width_cap`` bounds the starting K when the interval has no width;
    it defaults to the cap for ``epsilon = 1e-3``.
    """
    if k_i < 0:
        raise ValueError(f"Grover number must be nonnegative, got {k_i}")
    if not 0.0 <= theta_lo <= theta_hi <= HALF_PI:
        raise ValueError(f"invalid angle interval [{theta_lo}, {theta_hi}]")
    if zero_width_cap is None:
        zero_width_cap = IqaeConfig().zero_width_cap
    return _find_next_k(k_i, theta_lo, theta_hi, r_min, zero_width_cap)


def run_round(k: int, R: int, alpha_i: float, config: IqaeConfig, oracle: AmplitudeOracle,
              rng: np.random.Generator, *, index: int = 1,
              ledger: QueryLedger | None = None) -> RoundTrace:
    """Accumulate shots at Grover number ``k`` until termination, a jump in ``k``, or the budget runs out."""
    K = 2 * k + 1
    n_max = max_shots(alpha_i)
    if ledger is None:
        ledger = QueryLedger()
    n = n1 = 0
    while True:
        batch = min(config.n_shot, n_max - n)
        n1 += sample_shots(oracle, k, batch, rng, ledger)
        n += batch
        est = _ci_raw(n1, n, K, R, alpha_i)
        theta_lo, theta_hi, delta_a = est[4], est[5], est[9]
        k_next = None
        if delta_a <= config.epsilon:
            exit_ = RoundExit.TERMINATED
        else:
            k_temp = _find_next_k(k, theta_lo, theta_hi, config.r_min, config.zero_width_cap)
            if k_temp > k:
                exit_, k_next = RoundExit.NEXT_K, k_temp
            elif n >= n_max:
                exit_ = RoundExit.BUDGET_EXHAUSTED
            else:
                continue
        return RoundTrace(
            index=index, k=k, R=R, alpha_i=alpha_i, n_max=n_max, shots=n, hits=n1,
            a_hat_k=est[0], a_hat=est[6],
            ci_theta=ConfidenceInterval(theta_lo, theta_hi, Domain.ANGLE),
            ci_a=ConfidenceInterval(est[7], est[8], Domain.AMPLITUDE),
            delta_a=delta_a, grover_calls=k * n, exit=exit_, k_next=k_next,
        )


def run_iqae(config: IqaeConfig, oracle: AmplitudeOracle, rng: np.random.Generator) -> RunResult:
    ledger = QueryLedger()
    rounds: list[RoundTrace] = []
    k, theta_lo_last = 0, 0.0
    for i in range(1, config.max_rounds + 1):
        K = 2 * k + 1
        R = int(math.floor(K * theta_lo_last / HALF_PI))
        trace = run_round(k, R, config.alpha_for(K), config, oracle, rng, index=i, ledger=ledger)
        rounds.append(trace)
        if trace.exit is RoundExit.TERMINATED:
            return RunResult(a_hat=trace.a_hat, rounds=rounds,
                             total_grover_calls=ledger.grover_calls,
                             state_preparations=ledger.state_preparations)
        if trace.exit is RoundExit.NEXT_K:
            k = trace.k_next
        # a budget-exhausted round is retried at the same k from its own interval
        theta_lo_last = trace.ci_theta.lo
    raise RoundLimitExceeded(f"no termination within {config.max_rounds} rounds")


def mitigated_estimate(k_fin: int, N_fin: int, R_fin: int, hits: int) -> float:
    """Estimate from a re-executed final round with ``hits`` good outcomes in ``N_fin`` shots."""
    theta = (R_fin * HALF_PI + _gamma(hits / N_fin, R_fin)) / (2 * k_fin + 1)
    return math.sin(theta) ** 2


def run_mitigated(config: IqaeConfig, oracle: AmplitudeOracle, rng: np.random.Generator) -> RunResult:
    """Run IQAE, then repeat its final round once with no stopping rule and report that round's estimate."""
    plain = run_iqae(config, oracle, rng)
    k_fin, N_fin, R_fin = plain.k_fin, plain.N_fin, plain.R_fin
    ledger = QueryLedger()
    hits = sample_shots(oracle, k_fin, N_fin, rng, ledger)
    return replace(
        plain,
        a_hat=mitigated_estimate(k_fin, N_fin, R_fin, hits),
        total_grover_calls=plain.total_grover_calls + ledger.grover_calls,
        state_preparations=plain.state_preparations + ledger.state_preparations,
        mitigated=True,
        plain_a_hat=plain.a_hat,
        rerun_hits=hits,
    )
