"""Compiled fast path for the Bernoulli backend.

The arithmetic helpers are the *same code objects* as in
:mod:`iqaebias.estimation`, recompiled with numba against a namespace in which
their callees are compiled too. Only the round loop is restated here, and the
test suite checks it against :mod:`iqaebias.engine` on shared streams.
"""

from __future__ import annotations

import math
import types

from numba import njit

from . import estimation

_NAMESPACE = dict(vars(estimation))


def _compile(name):
    py = getattr(estimation, name)
    fn = types.FunctionType(py.__code__, _NAMESPACE, name, py.__defaults__)
    jitted = njit(nogil=True, cache=True)(fn)
    _NAMESPACE[name] = jitted
    return jitted


for _name in ("_asin_sqrt", "_gamma", "_grover_prob", "_halfwidth", "_max_shots",
              "_ci_raw", "_find_next_k"):
    _compile(_name)

_asin_sqrt = _NAMESPACE["_asin_sqrt"]
_gamma = _NAMESPACE["_gamma"]
_grover_prob = _NAMESPACE["_grover_prob"]
_max_shots = _NAMESPACE["_max_shots"]
_ci_raw = _NAMESPACE["_ci_raw"]
_find_next_k = _NAMESPACE["_find_next_k"]

HALF_PI = estimation.HALF_PI

# round exit codes, mirroring engine.RoundExit
TERMINATED = 0
NEXT_K = 1
BUDGET_EXHAUSTED = 2

# run status codes
OK = 0
ROUND_LIMIT = 1
ALPHA_DOMAIN = 2


@njit(nogil=True, cache=True)
def round_loop(a, k, R, alpha_i, epsilon, n_shot, r_min, zero_cap, rng):
    """One round; returns (exit, k_next, shots, hits, a_hat, theta_lo)."""
    K = 2 * k + 1
    n_max = _max_shots(alpha_i)
    p = _grover_prob(a, k)
    n = 0
    n1 = 0
    while True:
        batch = min(n_shot, n_max - n)
        for _ in range(batch):
            if rng.random() < p:
                n1 += 1
        n += batch
        est = _ci_raw(n1, n, K, R, alpha_i)
        theta_lo = est[4]
        if est[9] <= epsilon:
            return TERMINATED, k, n, n1, est[6], theta_lo
        k_temp = _find_next_k(k, theta_lo, est[5], r_min, zero_cap)
        if k_temp > k:
            return NEXT_K, k_temp, n, n1, est[6], theta_lo
        if n >= n_max:
            return BUDGET_EXHAUSTED, k, n, n1, est[6], theta_lo


@njit(nogil=True, cache=True)
def run(a, epsilon, alpha, n_shot, r_min, max_rounds, mitigate, rng):
    """Whole IQAE run.

    Returns (status, a_hat, plain_a_hat, k_fin, N_fin, R_fin, n_rounds,
    total_grover_calls, final_round_grover_calls, state_preparations).
    """
    k_max_value = math.pi / (4.0 * epsilon)
    zero_cap = 2 * int(math.ceil(k_max_value)) + 1
    k = 0
    theta_lo_last = 0.0
    total_g = 0
    total_a = 0
    for i in range(1, max_rounds + 1):
        K = 2 * k + 1
        alpha_i = (2.0 * alpha / 3.0) * (K / k_max_value)
        if not alpha_i < 2.0:
            return ALPHA_DOMAIN, math.nan, math.nan, k, 0, 0, i, total_g, 0, total_a
        R = int(math.floor(K * theta_lo_last / HALF_PI))
        exit_, k_next, n, n1, a_hat, theta_lo = round_loop(
            a, k, R, alpha_i, epsilon, n_shot, r_min, zero_cap, rng)
        total_g += k * n
        total_a += n
        if exit_ == TERMINATED:
            plain = a_hat
            if mitigate:
                p = _grover_prob(a, k)
                hits = 0
                for _ in range(n):
                    if rng.random() < p:
                        hits += 1
                theta = (R * HALF_PI + _gamma(hits / n, R)) / K
                a_hat = math.sin(theta) ** 2
                total_g += k * n
                total_a += n
            return OK, a_hat, plain, k, n, R, i, total_g, k * n, total_a
        k = k_next
        theta_lo_last = theta_lo
    return ROUND_LIMIT, math.nan, math.nan, k, 0, 0, max_rounds, total_g, 0, total_a
