"""Amplitude/angle kernel shared by the reference engine and the compiled fast path.

Functions prefixed with ``_`` are raw arithmetic with no validation. They are
written against the :mod:`math` module only so that :mod:`iqaebias._kernel`
can compile the very same source with numba.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

HALF_PI = 0.5 * math.pi

#: Slack allowed on arcsin inputs before they count as a domain error.
ARCSIN_SLACK = 1e-12

#: ``2 / (sin^2(pi/21) sin^2(8 pi/21))``, the shot-budget prefactor.
SHOT_BUDGET_CONSTANT = 2.0 / (math.sin(math.pi / 21) ** 2 * math.sin(8 * math.pi / 21) ** 2)


class Domain(enum.Enum):
    AMPLITUDE = "amplitude"
    ANGLE = "angle"


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    domain: Domain

    def __post_init__(self):
        # R = K places theta in (pi/2, pi]; angles are bounded by pi for that reason
        upper = 1.0 if self.domain is Domain.AMPLITUDE else math.pi
        if not (-ARCSIN_SLACK <= self.lo <= self.hi <= upper + ARCSIN_SLACK):
            raise ValueError(f"invalid {self.domain.value} interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class RoundParams:
    """Static parameters of one round: Grover number, confidence budget, shot cap, quadrant."""

    k: int
    alpha_i: float
    n_max: int
    R: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"Grover number must be nonnegative, got {self.k}")
        if self.n_max < 1:
            raise ValueError(f"shot budget must be positive, got {self.n_max}")
        if not 0.0 < self.alpha_i < 2.0:
            raise ValueError(f"alpha_i must lie in (0, 2), got {self.alpha_i}")
        if not 0 <= self.R <= self.K:
            raise ValueError(f"quadrant index {self.R} outside [0, {self.K}]")

    @property
    def K(self) -> int:
        return 2 * self.k + 1


@dataclass(frozen=True)
class RoundEstimate:
    """Everything derived from the accumulated counts of one round."""

    a_hat_k: float
    a_hat: float
    theta_hat: float
    ci_a_k: ConfidenceInterval
    ci_theta: ConfidenceInterval
    ci_a: ConfidenceInterval
    delta_a: float


# --------------------------------------------------------------------------
# raw kernels (numba-compatible)


def _asin_sqrt(x):
    # caller guarantees x within ARCSIN_SLACK of [0, 1]
    if x < 0.0:
        x = 0.0
    elif x > 1.0:
        x = 1.0
    return math.asin(math.sqrt(x))


def _gamma(a_prime, r):
    g = _asin_sqrt(a_prime)
    if r % 2 == 1:
        return HALF_PI - g
    return g


def _grover_prob(a, k):
    if k == 0:
        return a
    return math.sin((2 * k + 1) * _asin_sqrt(a)) ** 2


def _halfwidth(n, alpha_i):
    return math.sqrt(math.log(2.0 / alpha_i) / (2.0 * n))


def _max_shots(alpha_i):
    return int(math.ceil(SHOT_BUDGET_CONSTANT * math.log(2.0 / alpha_i)))


def _ci_raw(n1, n, K, R, alpha_i):
    """Return (a_hat_k, ak_lo, ak_hi, theta_hat, theta_lo, theta_hi, a_hat, a_lo, a_hi, delta_a)."""
    a_hat_k = n1 / n
    eps = _halfwidth(n, alpha_i)
    ak_lo = max(0.0, a_hat_k - eps)
    ak_hi = min(1.0, a_hat_k + eps)
    base = R * HALF_PI
    theta_hat = (base + _gamma(a_hat_k, R)) / K
    t1 = (base + _gamma(ak_lo, R)) / K
    t2 = (base + _gamma(ak_hi, R)) / K
    theta_lo = min(t1, t2)
    theta_hi = max(t1, t2)
    a_hat = math.sin(theta_hat) ** 2
    s1 = math.sin(theta_lo) ** 2
    s2 = math.sin(theta_hi) ** 2
    a_lo = min(s1, s2)
    a_hi = max(s1, s2)
    delta_a = max(a_hat - a_lo, a_hi - a_hat)
    return a_hat_k, ak_lo, ak_hi, theta_hat, theta_lo, theta_hi, a_hat, a_lo, a_hi, delta_a


def _find_next_k(k_i, theta_lo, theta_hi, r_min, zero_width_cap):
    K_i = 2 * k_i + 1
    width = theta_hi - theta_lo
    # a width this small only arises from underflow; same guard as width == 0
    if width > 0.0 and HALF_PI / width < 4.0e18:
        K = int(math.floor(HALF_PI / width))
    else:
        K = zero_width_cap
    if K % 2 == 0:
        K -= 1
    while K >= r_min * K_i:
        if math.floor(K * theta_lo / HALF_PI) == math.ceil(K * theta_hi / HALF_PI) - 1:
            return (K - 1) // 2
        K -= 2
    return k_i


# --------------------------------------------------------------------------
# validated public API


def _check_unit(name: str, x: float) -> None:
    if not (-ARCSIN_SLACK <= x <= 1.0 + ARCSIN_SLACK):
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")


def theta_of_amplitude(a: float) -> float:
    """``arcsin(sqrt(a))``: the rotation angle whose squared sine is ``a``."""
    _check_unit("amplitude", a)
    return _asin_sqrt(a)


def amplitude_of_theta(theta: float) -> float:
    return math.sin(theta) ** 2


def grover_amplitude(a: float, k: int) -> float:
    """Probability of the good outcome after ``k`` Grover iterations."""
    if k < 0:
        raise ValueError(f"Grover number must be nonnegative, got {k}")
    _check_unit("amplitude", a)
    return _grover_prob(a, k)


def gamma(a_prime: float, r: int) -> float:
    """Invert a measured probability to an angle in [0, pi/2] on the branch fixed by parity of ``r``."""
    _check_unit("a_prime", a_prime)
    if r < 0:
        raise ValueError(f"quadrant index must be nonnegative, got {r}")
    return _gamma(a_prime, r)


def hoeffding_halfwidth(n: int, alpha_i: float) -> float:
    if n < 1:
        raise ValueError(f"shot count must be positive, got {n}")
    if not 0.0 < alpha_i < 2.0:
        raise ValueError(f"alpha_i must lie in (0, 2), got {alpha_i}")
    return _halfwidth(n, alpha_i)


def max_shots(alpha_i: float) -> int:
    """Shot budget of a round, rounded up so the budget never falls short."""
    if not 0.0 < alpha_i < 2.0:
        raise ValueError(f"alpha_i must lie in (0, 2), got {alpha_i}")
    return _max_shots(alpha_i)


def k_max(epsilon: float) -> float:
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    return math.pi / (4.0 * epsilon)


def round_alpha(K: int, k_max_value: float, alpha: float) -> float:
    if K < 1:
        raise ValueError(f"K must be a positive odd integer, got {K}")
    if k_max_value <= 0.0:
        raise ValueError(f"K_max must be positive, got {k_max_value}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return (2.0 * alpha / 3.0) * (K / k_max_value)


def quadrant(K: int, theta: float) -> int:
    """Index of the quarter period of ``sin^2`` that contains ``K * theta``."""
    return int(math.floor(K * theta / HALF_PI))


def ci_from_counts(n1: int, n: int, params: RoundParams) -> RoundEstimate:
    """Maximum-likelihood estimates and Hoeffding intervals after ``n1`` hits in ``n`` shots."""
    if n < 1:
        raise ValueError(f"shot count must be positive, got {n}")
    if not 0 <= n1 <= n:
        raise ValueError(f"hit count {n1} outside [0, {n}]")
    (a_hat_k, ak_lo, ak_hi, theta_hat, theta_lo, theta_hi,
     a_hat, a_lo, a_hi, delta_a) = _ci_raw(n1, n, params.K, params.R, params.alpha_i)
    return RoundEstimate(
        a_hat_k=a_hat_k,
        a_hat=a_hat,
        theta_hat=theta_hat,
        ci_a_k=ConfidenceInterval(ak_lo, ak_hi, Domain.AMPLITUDE),
        ci_theta=ConfidenceInterval(theta_lo, theta_hi, Domain.ANGLE),
        ci_a=ConfidenceInterval(a_lo, a_hi, Domain.AMPLITUDE),
        delta_a=delta_a,
    )


def f_fin(a: float, k: int) -> float:
    """Fractional part of ``(2k+1) * theta_a / pi``."""
    if k < 0:
        raise ValueError(f"Grover number must be nonnegative, got {k}")
    x = (2 * k + 1) * theta_of_amplitude(a) / math.pi
    return x - math.floor(x)
