"""Monte Carlo campaigns over the engine and the statistics built on them.

Every run draws from its own stream ``derive_stream(master_seed, index)``,
where ``index`` is the run's position in the flattened task list of the
campaign. Results land in preallocated arrays and are reduced in index
order, so the output is the same for any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernel
from .engine import IqaeConfig, RunResult
from .estimation import (
    HALF_PI,
    RoundParams,
    ci_from_counts,
    f_fin,
    max_shots,
    quadrant,
    theta_of_amplitude,
)
from .sampler import derive_stream

#: Cells with fewer terminating runs than this fraction of ``n_run`` are NaN.
MIN_END_FRACTION = 0.1

NAN_INSUFFICIENT = "insufficient_terminations"
NAN_OUT_OF_DOMAIN = "out_of_domain"


def default_grid(points: int = 201, a_min: float = 0.001, a_max: float = 0.999) -> list[float]:
    if points == 1:
        return [a_min]
    return [float(x) for x in np.linspace(a_min, a_max, points)]


# --------------------------------------------------------------------------
# running many tasks


def _run_chunks(fn, n_tasks: int, threads: int) -> None:
    """Call ``fn(start, stop)`` over a partition of ``range(n_tasks)``."""
    threads = max(1, int(threads))
    if threads == 1 or n_tasks < 2:
        fn(0, n_tasks)
        return
    n_chunks = min(n_tasks, threads * 4)
    edges = np.linspace(0, n_tasks, n_chunks + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda ij: fn(*ij), zip(edges[:-1], edges[1:])))


@dataclass(frozen=True)
class Campaign:
    """Column store of ``n_run`` fast-path runs at a single amplitude."""

    a: float
    config: IqaeConfig
    mitigated: bool
    status: np.ndarray
    a_hat: np.ndarray
    plain_a_hat: np.ndarray
    k_fin: np.ndarray
    N_fin: np.ndarray
    R_fin: np.ndarray
    rounds: np.ndarray
    total_grover_calls: np.ndarray
    final_round_grover_calls: np.ndarray
    state_preparations: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.status == _kernel.OK

    @property
    def n_failed(self) -> int:
        return int(np.count_nonzero(~self.ok))

    @property
    def errors(self) -> np.ndarray:
        return self.a_hat[self.ok] - self.a

    @property
    def f_fin(self) -> np.ndarray:
        return np.array([f_fin(self.a, int(k)) for k in self.k_fin])


def simulate(a: float, config: IqaeConfig, n_run: int, *, mitigated: bool = False,
             master_seed: int = 0, index_offset: int = 0, threads: int = 1) -> Campaign:
    """Run the Bernoulli-backed engine ``n_run`` times; run ``c`` uses task index ``index_offset + c``."""
    if n_run < 1:
        raise ValueError(f"n_run must be positive, got {n_run}")
    out = np.empty((n_run, 10), dtype=np.float64)
    args = (float(a), config.epsilon, config.alpha, config.n_shot, config.r_min,
            config.max_rounds, bool(mitigated))

    def work(start, stop):
        for c in range(start, stop):
            out[c] = _kernel.run(*args, derive_stream(master_seed, index_offset + c))

    _run_chunks(work, n_run, threads)
    ints = out[:, [0, 3, 4, 5, 6, 7, 8, 9]].astype(np.int64)
    return Campaign(
        a=float(a), config=config, mitigated=mitigated,
        status=ints[:, 0], a_hat=out[:, 1], plain_a_hat=out[:, 2],
        k_fin=ints[:, 1], N_fin=ints[:, 2], R_fin=ints[:, 3], rounds=ints[:, 4],
        total_grover_calls=ints[:, 5], final_round_grover_calls=ints[:, 6],
        state_preparations=ints[:, 7],
    )


# --------------------------------------------------------------------------
# bias over amplitudes


@dataclass(frozen=True)
class BiasRow:
    a: float
    n_run: int
    mean_error: float
    stderr: float
    success_rate: float
    mean_queries: float
    mean_final_round_queries: float
    mitigated: bool
    n_failed: int = 0

    @property
    def biased(self) -> bool:
        return abs(self.mean_error) >= 2.0 * self.stderr


def bias_statistics(errors: Sequence[float]) -> tuple[float, float]:
    """Mean error and its (uncentered) standard error over a set of runs."""
    n = len(errors)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(errors) / n
    stderr = math.sqrt(math.fsum(e * e for e in errors) / n) / math.sqrt(n)
    return mean, stderr


def summarize(campaign: Campaign) -> BiasRow:
    ok = campaign.ok
    errors = campaign.errors.tolist()
    mean, stderr = bias_statistics(errors)
    n = len(errors)
    eps = campaign.config.epsilon
    return BiasRow(
        a=campaign.a,
        n_run=n,
        mean_error=mean,
        stderr=stderr,
        success_rate=sum(abs(e) <= eps for e in errors) / n if n else math.nan,
        mean_queries=math.fsum(campaign.total_grover_calls[ok].tolist()) / n if n else math.nan,
        mean_final_round_queries=(math.fsum(campaign.final_round_grover_calls[ok].tolist()) / n
                                  if n else math.nan),
        mitigated=campaign.mitigated,
        n_failed=campaign.n_failed,
    )


def sweep_bias(a_grid: Iterable[float], config: IqaeConfig, n_run: int, mitigated: bool = False,
               master_seed: int = 0, threads: int = 1) -> list[BiasRow]:
    rows = []
    for g, a in enumerate(a_grid):
        camp = simulate(a, config, n_run, mitigated=mitigated, master_seed=master_seed,
                        index_offset=g * n_run, threads=threads)
        rows.append(summarize(camp))
    return rows


# --------------------------------------------------------------------------
# decomposition over the final Grover number


@dataclass(frozen=True)
class KfinGroup:
    k_fin: int
    probability: float
    conditional_mean_error: float
    count: int
    # exact sum of the group's errors, so the recombination is not at the mercy of rounding
    error_sum: Fraction = Fraction(0)


def decompose_bias(results: Campaign | Sequence[RunResult], a: float | None = None) -> list[KfinGroup]:
    """Empirical split of the mean error into per-``k_fin`` probabilities and conditional means."""
    if isinstance(results, Campaign):
        ks = results.k_fin[results.ok].tolist()
        errs = results.errors.tolist()
    else:
        if a is None:
            raise ValueError("the true amplitude is required for a list of RunResult")
        ks = [r.k_fin for r in results]
        errs = [r.a_hat - a for r in results]
    total = len(errs)
    groups: dict[int, list[float]] = {}
    for k, e in zip(ks, errs):
        groups.setdefault(int(k), []).append(e)
    out = []
    for k, g in sorted(groups.items()):
        exact = sum(map(Fraction, g), Fraction(0))
        out.append(KfinGroup(k, len(g) / total, float(exact / len(g)), len(g), exact))
    return out


def recombine(groups: Sequence[KfinGroup]) -> float:
    """Probability-weighted sum of conditional means, evaluated in exact rationals.

    With ``p_k = n_k / N`` and ``b_k = S_k / n_k`` the sum is ``sum_k S_k / N``,
    which equals the overall mean error up to the final rounding.
    """
    total = sum(g.count for g in groups)
    if total == 0:
        return math.nan
    return float(sum((Fraction(g.count, total) * (g.error_sum / g.count) for g in groups),
                     Fraction(0)))


# --------------------------------------------------------------------------
# conditional bias with (k_fin, f_fin) pinned


@dataclass(frozen=True)
class CondBiasCell:
    k_fin: int
    f_fin: float
    a_tilde: float
    n_end: int
    n_run: int
    b_tilde: float
    nan_reason: str = ""


def adjusted_amplitude(k_fin: int, f_target: float, a: float) -> tuple[float, bool]:
    """Amplitude near ``a`` whose final-round fractional part equals ``f_target``.

    Returns ``(a_tilde, in_domain)``; ``in_domain`` is False when the target
    angle passes pi/2, where arcsin would fold ``f_target`` onto ``1 - f_target``.
    """
    K = 2 * k_fin + 1
    R_tilde = math.floor(K * theta_of_amplitude(a) / math.pi)
    in_domain = R_tilde + f_target <= k_fin + 0.5
    return math.sin((R_tilde + f_target) * math.pi / K) ** 2, in_domain


def conditional_bias(k_fin: int, f_target: float, a: float, n_run: int, config: IqaeConfig,
                     master_seed: int = 0, *, cell_index: int = 0, threads: int = 1,
                     min_end_fraction: float = MIN_END_FRACTION) -> CondBiasCell:
    """Mean final-round error over single rounds that terminate, with ``k_fin`` and ``f_fin`` fixed."""
    if k_fin < 0:
        raise ValueError(f"k_fin must be nonnegative, got {k_fin}")
    if not 0.0 <= f_target <= 1.0:
        raise ValueError(f"f_target must lie in [0, 1], got {f_target}")
    if not 0.0 < a < 1.0:
        raise ValueError(f"a must lie in (0, 1), got {a}")
    a_tilde, in_domain = adjusted_amplitude(k_fin, f_target, a)
    if not in_domain:
        return CondBiasCell(k_fin, f_target, a_tilde, 0, n_run, math.nan, NAN_OUT_OF_DOMAIN)

    K = 2 * k_fin + 1
    R = quadrant(K, theta_of_amplitude(a_tilde))
    alpha_i = config.alpha_for(K)
    max_shots(alpha_i)  # domain check on alpha_i
    exits = np.empty(n_run, dtype=np.int64)
    estimates = np.empty(n_run, dtype=np.float64)

    def work(start, stop):
        for c in range(start, stop):
            rng = derive_stream(master_seed, cell_index * n_run + c)
            res = _kernel.round_loop(a_tilde, k_fin, R, alpha_i, config.epsilon, config.n_shot,
                                     config.r_min, config.zero_width_cap, rng)
            exits[c] = res[0]
            estimates[c] = res[4]

    _run_chunks(work, n_run, threads)
    ended = exits == _kernel.TERMINATED
    n_end = int(np.count_nonzero(ended))
    if n_end < min_end_fraction * n_run:
        return CondBiasCell(k_fin, f_target, a_tilde, n_end, n_run, math.nan, NAN_INSUFFICIENT)
    b = math.fsum((estimates[ended] - a_tilde).tolist()) / n_end
    return CondBiasCell(k_fin, f_target, a_tilde, n_end, n_run, b)


def cond_bias_grid(k_values: Sequence[int], f_grid: Sequence[float], a: float, n_run: int,
                   config: IqaeConfig, master_seed: int = 0, threads: int = 1,
                   min_end_fraction: float = MIN_END_FRACTION) -> list[CondBiasCell]:
    if len(k_values) == 0 or len(f_grid) == 0:
        raise ValueError("k and f grids must be nonempty")
    cells = []
    for ik, k in enumerate(k_values):
        for jf, f in enumerate(f_grid):
            cells.append(conditional_bias(
                int(k), float(f), a, n_run, config, master_seed,
                cell_index=ik * len(f_grid) + jf, threads=threads,
                min_end_fraction=min_end_fraction))
    return cells


def antisymmetry_correlation(cells: Sequence[CondBiasCell]) -> float:
    """Correlation of ``b(f)`` with ``-b(1 - f)`` over cells of one ``k_fin`` on a grid symmetric about 1/2."""
    by_f = {round(c.f_fin, 12): c.b_tilde for c in cells}
    xs, ys = [], []
    for c in cells:
        mirror = by_f.get(round(1.0 - c.f_fin, 12))
        if mirror is None or math.isnan(c.b_tilde) or math.isnan(mirror):
            continue
        xs.append(c.b_tilde)
        ys.append(-mirror)
    if len(xs) < 3:
        return math.nan
    return float(np.corrcoef(xs, ys)[0, 1])


# --------------------------------------------------------------------------
# resonance


@dataclass(frozen=True)
class Resonance:
    l: int
    m: int
    delta: float


def best_rational(x: Fraction, max_den: int) -> Fraction:
    """Closest fraction to ``x`` with denominator at most ``max_den``; ties go to the smaller denominator.

    The answer is either the last continued-fraction convergent within the
    bound or the largest semiconvergent after it.
    """
    p0, q0, p1, q1 = 0, 1, 1, 0
    n, d = x.numerator, x.denominator
    while True:
        a = n // d
        q2 = q0 + a * q1
        if q2 > max_den:
            break
        p0, q0, p1, q1 = p1, q1, p0 + a * p1, q2
        n, d = d, n - a * d
        if d == 0:
            return Fraction(p1, q1)
    t = (max_den - q0) // q1
    semi = Fraction(p0 + t * p1, q0 + t * q1)
    conv = Fraction(p1, q1)
    d_semi, d_conv = abs(semi - x), abs(conv - x)
    if d_semi < d_conv or (d_semi == d_conv and semi.denominator < conv.denominator):
        return semi
    return conv


def detect_resonance(a: float, m_max: int = 50) -> Resonance:
    """Nearest ``theta_a = l pi / (2 m)`` with ``0 < l < m <= m_max`` and ``gcd(l, m) = 1``."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"a must lie in (0, 1), got {a}")
    if m_max < 2:
        raise ValueError(f"m_max must be at least 2, got {m_max}")
    theta = theta_of_amplitude(a)
    x = Fraction(theta / HALF_PI)
    r = best_rational(x, m_max)
    if r.numerator == 0:
        r = Fraction(1, m_max)
    elif r.numerator == r.denominator:
        r = Fraction(m_max - 1, m_max)
    l, m = r.numerator, r.denominator
    return Resonance(l, m, theta - l * math.pi / (2 * m))


# --------------------------------------------------------------------------
# (k_fin, f_fin) scatter


@dataclass(frozen=True)
class ScatterRecord:
    run_id: int
    a_hat: float
    error: float
    k_fin: int
    f_fin: float
    N_fin: int
    R_fin: int
    total_queries: int
    rounds: int
    success: bool


def scatter_records(campaign: Campaign) -> list[ScatterRecord]:
    eps = campaign.config.epsilon
    out = []
    for c in np.flatnonzero(campaign.ok):
        k = int(campaign.k_fin[c])
        err = float(campaign.a_hat[c]) - campaign.a
        out.append(ScatterRecord(
            run_id=int(c), a_hat=float(campaign.a_hat[c]), error=err, k_fin=k,
            f_fin=f_fin(campaign.a, k), N_fin=int(campaign.N_fin[c]), R_fin=int(campaign.R_fin[c]),
            total_queries=int(campaign.total_grover_calls[c]), rounds=int(campaign.rounds[c]),
            success=abs(err) <= eps))
    return out


def scatter_kfin_ffin(a: float, config: IqaeConfig, n_run: int, master_seed: int = 0,
                      threads: int = 1, mitigated: bool = False) -> list[ScatterRecord]:
    camp = simulate(a, config, n_run, mitigated=mitigated, master_seed=master_seed, threads=threads)
    return scatter_records(camp)


def occupied_bins(values: Iterable[float], width: float = 0.02) -> int:
    return len({min(int(v / width), int(round(1 / width)) - 1) for v in values})


# --------------------------------------------------------------------------
# interval profile of a single round


@dataclass(frozen=True)
class ProfileRow:
    a_hat: float
    a_lo: float
    a_hi: float
    delta_a: float


def ci_profile(k: int, n: int, a: float, config: IqaeConfig | None = None) -> list[ProfileRow]:
    """Interval ends and estimated accuracy for every achievable estimate after ``n`` shots at ``k``.

    The quadrant is the one containing ``(2k+1) theta_a``, i.e. the round a run
    would be in if its previous interval enclosed ``a``. Rows are sorted by
    ``a_hat``.
    """
    if k < 0 or n < 1:
        raise ValueError(f"need k >= 0 and n >= 1, got k={k}, n={n}")
    config = config or IqaeConfig()
    K = 2 * k + 1
    R = quadrant(K, theta_of_amplitude(a))
    params = RoundParams(k=k, alpha_i=config.alpha_for(K), n_max=max(n, 1), R=min(R, K))
    rows = []
    for n1 in range(n + 1):
        est = ci_from_counts(n1, n, params)
        rows.append(ProfileRow(est.a_hat, est.ci_a.lo, est.ci_a.hi, est.delta_a))
    rows.sort(key=lambda r: r.a_hat)
    return rows
