"""Measurement simulation: oracles, deterministic per-task streams, query accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .estimation import _check_unit, _grover_prob

#: Name of the bit generator behind every stream; recorded in output metadata.
RNG_NAME = "numpy.random.Philox(4x64-10)"

_U64 = (1 << 64) - 1


class AmplitudeOracle(Protocol):
    def sample(self, k: int, n: int, rng: np.random.Generator) -> int:
        """Number of good outcomes among ``n`` measurements after ``k`` Grover iterations."""
        ...


@dataclass(frozen=True)
class BernoulliOracle:
    """Stands in for the quantum device: each shot is a Bernoulli draw at the amplified probability.

    Shots are explicit uniform draws, one per shot, compared against the
    success probability. The compiled fast path consumes the stream in the
    same order, so both see identical outcomes.
    """

    amplitude: float

    def __post_init__(self):
        _check_unit("amplitude", self.amplitude)

    def probability(self, k: int) -> float:
        return _grover_prob(self.amplitude, k)

    def sample(self, k: int, n: int, rng: np.random.Generator) -> int:
        p = self.probability(k)
        return int(np.count_nonzero(rng.random(n) < p))


class ReplayOracle:
    """Feeds a fixed sequence of 0/1 shot outcomes, ignoring ``k`` and the stream."""

    def __init__(self, outcomes):
        self.outcomes = [int(x) for x in outcomes]
        self._pos = 0

    def sample(self, k: int, n: int, rng=None) -> int:
        chunk = self.outcomes[self._pos:self._pos + n]
        if len(chunk) < n:
            raise IndexError("replay sequence exhausted")
        self._pos += n
        return sum(chunk)


@dataclass
class QueryLedger:
    """Running totals of Grover-operator applications and state preparations."""

    grover_calls: int = 0
    state_preparations: int = 0

    def record(self, k: int, n: int) -> None:
        self.grover_calls += k * n
        self.state_preparations += n

    def merge(self, other: QueryLedger) -> QueryLedger:
        return QueryLedger(
            self.grover_calls + other.grover_calls,
            self.state_preparations + other.state_preparations,
        )


def sample_shots(oracle: AmplitudeOracle, k: int, n: int, rng: np.random.Generator,
                 ledger: QueryLedger | None = None) -> int:
    if n < 1:
        raise ValueError(f"batch size must be positive, got {n}")
    n1 = oracle.sample(k, n, rng)
    if not 0 <= n1 <= n:
        raise RuntimeError(f"oracle returned {n1} hits for {n} shots")
    if ledger is not None:
        ledger.record(k, n)
    return n1


def derive_stream(master_seed: int, task_index: int) -> np.random.Generator:
    """Independent generator for one task of a campaign.

    The stream is Philox-4x64 keyed by the 128-bit word
    ``(master_seed, task_index)`` with the counter starting at zero. Philox is a
    keyed bijection, so every (seed, index) pair addresses its own stream and
    the result does not depend on the order tasks are executed in.
    """
    key = np.array([master_seed & _U64, task_index & _U64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SeedPlan:
    master_seed: int

    def stream(self, task_index: int) -> np.random.Generator:
        return derive_stream(self.master_seed, task_index)

    def describe(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "generator": RNG_NAME,
            "derivation": "Philox key = (master_seed, task_index), counter = 0",
        }
