import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iqaebias.engine import IqaeConfig, run_iqae
from iqaebias.estimation import HALF_PI, f_fin, theta_of_amplitude
from iqaebias.harness import (
    NAN_INSUFFICIENT,
    NAN_OUT_OF_DOMAIN,
    CondBiasCell,
    adjusted_amplitude,
    antisymmetry_correlation,
    best_rational,
    bias_statistics,
    ci_profile,
    cond_bias_grid,
    conditional_bias,
    decompose_bias,
    default_grid,
    detect_resonance,
    occupied_bins,
    recombine,
    scatter_kfin_ffin,
    simulate,
    summarize,
    sweep_bias,
)
from iqaebias.sampler import BernoulliOracle, derive_stream
from oracles import brute_resonance

DEFAULT = IqaeConfig()


@pytest.mark.parametrize("a, k, expected", [(0.25, 0, 1 / 6), (0.25, 1, 0.5), (0.25, 3, 1 / 6)])
def test_f_fin_examples(a, k, expected):
    assert f_fin(a, k) == pytest.approx(expected, abs=1e-12)


@given(st.floats(1e-9, 1 - 1e-9), st.integers(0, 10**5))
def test_f_fin_range(a, k):
    assert 0.0 <= f_fin(a, k) < 1.0


def test_default_grid():
    g = default_grid()
    assert len(g) == 201 and g[0] == 0.001 and g[-1] == 0.999
    assert g[100] == pytest.approx(0.5, abs=1e-15)


def test_bias_statistics_formulae():
    errs = [1e-3, -2e-3, 4e-3]
    mean, se = bias_statistics(errs)
    assert mean == pytest.approx(1e-3, rel=1e-15)
    assert se == pytest.approx(math.sqrt(sum(e * e for e in errs) / 3) / math.sqrt(3), rel=1e-14)
    assert bias_statistics([-5e-4]) == (-5e-4, 5e-4)


# --------------------------------------------------------------------------
# decomposition over k_fin


def test_decompose_examples():
    res = [run_iqae(DEFAULT, BernoulliOracle(0.3), derive_stream(0, c)) for c in range(2)]
    (g,) = decompose_bias(res[:1], 0.3)
    assert g.probability == 1.0 and g.conditional_mean_error == res[0].a_hat - 0.3
    if res[0].k_fin == res[1].k_fin:
        (g,) = decompose_bias(res, 0.3)
        assert g.conditional_mean_error == pytest.approx(
            (res[0].a_hat + res[1].a_hat - 0.6) / 2, abs=1e-18)
    assert decompose_bias([], 0.3) == []


def test_decomposition_identity_on_campaign():
    camp = simulate(0.2505, DEFAULT, 2000, master_seed=4)
    groups = decompose_bias(camp)
    row = summarize(camp)
    assert math.fsum(g.probability for g in groups) == pytest.approx(1.0, abs=1e-15)
    assert abs(recombine(groups) - row.mean_error) <= 1e-15 * abs(row.mean_error)
    assert sum(g.count for g in groups) == row.n_run


# --------------------------------------------------------------------------
# conditional bias


@settings(deadline=None)
@given(st.floats(0.001, 0.999), st.integers(0, 600))
def test_fixed_point(a, k):
    a_tilde, ok = adjusted_amplitude(k, f_fin(a, k), a)
    assert ok
    assert abs(a_tilde - a) <= 1e-12


def test_adjusted_amplitude_example():
    a_tilde, ok = adjusted_amplitude(1, 0.5, 0.25)
    assert ok and a_tilde == pytest.approx(0.25, abs=1e-15)


def test_out_of_domain_cell():
    # a near 1 at k = 1: R_tilde = 1, so R_tilde + f > 1.5 for f > 0.5
    a = 0.99
    K = 3
    assert math.floor(K * theta_of_amplitude(a) / math.pi) == 1
    _, ok = adjusted_amplitude(1, 0.9, a)
    assert not ok
    cell = conditional_bias(1, 0.9, a, 10, DEFAULT)
    assert math.isnan(cell.b_tilde) and cell.nan_reason == NAN_OUT_OF_DOMAIN


def test_insufficient_terminations_is_nan():
    # at k = 0 with a mid-range amplitude every round leaves for a larger k
    cell = conditional_bias(0, 0.3, 0.4, 50, DEFAULT)
    assert cell.n_end == 0
    assert math.isnan(cell.b_tilde) and cell.nan_reason == NAN_INSUFFICIENT


def test_nan_threshold_is_exact():
    cell = conditional_bias(200, 0.3, 0.2505, 200, DEFAULT, master_seed=3)
    assert 0 < cell.n_end < cell.n_run
    frac = cell.n_end / cell.n_run
    below = conditional_bias(200, 0.3, 0.2505, 200, DEFAULT, master_seed=3,
                             min_end_fraction=frac + 1e-9)
    at = conditional_bias(200, 0.3, 0.2505, 200, DEFAULT, master_seed=3, min_end_fraction=frac)
    assert math.isnan(below.b_tilde) and not math.isnan(at.b_tilde)


def test_grid_fixed_point_cell():
    a = 0.2505
    (cell,) = cond_bias_grid([1], [f_fin(a, 1)], a, 20, DEFAULT)
    assert cell.a_tilde == pytest.approx(a, abs=1e-12)


def test_grid_thread_invariance():
    args = ([200, 400], [0.2, 0.5, 0.8], 0.2505, 300, DEFAULT, 8)
    assert cond_bias_grid(*args, threads=1) == cond_bias_grid(*args, threads=3)


def test_antisymmetry_correlation_on_synthetic_cells():
    fs = np.linspace(0, 1, 21)
    cells = [CondBiasCell(200, float(f), 0.25, 10, 10, math.sin(2 * math.pi * f)) for f in fs]
    assert antisymmetry_correlation(cells) == pytest.approx(1.0, abs=1e-12)
    sym = [CondBiasCell(200, float(f), 0.25, 10, 10, math.cos(2 * math.pi * f)) for f in fs]
    assert antisymmetry_correlation(sym) == pytest.approx(-1.0, abs=1e-12)


# --------------------------------------------------------------------------
# resonance


@pytest.mark.parametrize("a, l, m", [(0.2505, 1, 3), (0.25, 1, 3), (0.5, 1, 2)])
def test_detect_resonance_examples(a, l, m):
    r = detect_resonance(a)
    assert (r.l, r.m) == (l, m)
    assert r.delta == pytest.approx(theta_of_amplitude(a) - l * math.pi / (2 * m), abs=1e-16)


def test_detect_resonance_delta_value():
    assert detect_resonance(0.2505).delta == pytest.approx(0.000577, abs=5e-7)
    assert abs(detect_resonance(0.25).delta) < 1e-15
    assert abs(detect_resonance(0.5).delta) < 1e-15


def test_detect_resonance_matches_brute_force():
    rnd = random.Random(3)
    for _ in range(300):
        a = rnd.choice([rnd.random(), rnd.uniform(0, 1e-3), rnd.uniform(0.999, 1)])
        if not 0 < a < 1:
            continue
        m_max = rnd.randint(2, 200)
        r = detect_resonance(a, m_max)
        assert (r.l, r.m) == brute_resonance(a, m_max), (a, m_max)


@given(st.fractions(0, 5), st.integers(1, 300))
def test_best_rational_is_closest(x, max_den):
    r = best_rational(x, max_den)
    assert r.denominator <= max_den
    for q in range(1, max_den + 1):
        p = round(x * q)
        assert abs(x - r) <= abs(x - Fraction(p, q))


# --------------------------------------------------------------------------
# sweeps and scatter


def test_sweep_thread_invariance():
    grid = [0.1, 0.2505]
    assert sweep_bias(grid, DEFAULT, 200, master_seed=5, threads=1) == \
        sweep_bias(grid, DEFAULT, 200, master_seed=5, threads=4)


def test_sweep_row_fields():
    (row,) = sweep_bias([0.001], DEFAULT, 300, master_seed=1)
    assert row.n_run == 300 and row.n_failed == 0
    assert 0.0 <= row.success_rate <= 1.0 and row.stderr >= 0
    assert row.mean_final_round_queries <= row.mean_queries


def test_scatter_at_exact_resonance():
    recs = scatter_kfin_ffin(0.25, DEFAULT, 500, master_seed=2)
    for r in recs:
        assert min(abs(r.f_fin - t) for t in (1 / 6, 0.5, 5 / 6)) <= 1e-12


def test_scatter_matches_resonance_formula():
    a = 0.2505
    res = detect_resonance(a)
    for r in scatter_kfin_ffin(a, DEFAULT, 300, master_seed=2):
        x = (2 * r.k_fin + 1) * (math.pi / 6 + res.delta) / math.pi
        assert abs(r.f_fin - (x - math.floor(x))) <= 1e-12


def test_occupied_bins():
    assert occupied_bins([0.0, 0.01, 0.019, 0.5, 0.999]) == 3


# --------------------------------------------------------------------------
# interval profile


def test_ci_profile_examples():
    rows = ci_profile(0, 100, 0.25)
    assert len(rows) == 101
    first = rows[0]
    assert first.a_hat == 0.0 and first.a_lo == 0.0
    assert first.delta_a == first.a_hi
    for r in rows:
        assert r.a_lo <= r.a_hat <= r.a_hi
    assert all(x.a_hat <= y.a_hat for x, y in zip(rows, rows[1:]))


def test_ci_profile_k200():
    a = 0.2505
    rows = ci_profile(200, 100, a)
    K = 401
    R = math.floor(K * theta_of_amplitude(a) / HALF_PI)
    for r in rows:
        assert math.floor(K * theta_of_amplitude(r.a_hat) / HALF_PI) in (R, R + 1)
        assert r.a_lo <= r.a_hat <= r.a_hi
