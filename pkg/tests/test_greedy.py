import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from togl.data import SINC, SampleSet, eval_target, gen_samples, rmse
from togl.dictionary import Dictionary, build_rbf_dictionary, packing_centers
from togl.greedy import (ARGMAX, DELTA_ARBITRARY, DELTA_RANDOM, UNIFORM_RANDOM, Estimator,
                         GreedyConfig, NotApplicable, Termination, adaptive,
                         adaptive_argmax_sweep, correlation_ratios, fit_greedy, fixed_k,
                         greedy_path, kth_max, error_certificate, predict, select_atom,
                         should_stop, threshold_only, threshold_plus_k)
from togl.projection import GreedyState, emp_norm

from conftest import rbf_setup

SQ5 = math.sqrt(5)
TOY_D = Dictionary.from_design([[1.0, 1.0], [1.0, -1.0]])
TOY_Z = SampleSet([0.0, 1.0], [3.0, 1.0])
seeds = st.integers(0, 2**32 - 1)


def test_ratio_examples():
    r = np.array([3.0, 1.0])
    ratios = correlation_ratios(r, TOY_D.design)
    np.testing.assert_allclose(ratios, [2 / SQ5, 1 / SQ5], rtol=1e-15)
    for c in (1e-6, 3.0, 1e8):
        np.testing.assert_allclose(correlation_ratios(c * r, TOY_D.design), ratios, rtol=1e-12)
    with pytest.raises(ZeroDivisionError):
        correlation_ratios(np.zeros(2), TOY_D.design)


def test_select_examples():
    ratios = np.array([2 / SQ5, 1 / SQ5])
    assert select_atom(ARGMAX, ratios) == 0
    assert select_atom(kth_max(2), ratios) == 1
    assert select_atom(DELTA_ARBITRARY, ratios, delta=0.95) is None
    assert select_atom(DELTA_ARBITRARY, ratios, delta=0.5) == 0
    # ties go to the lower index
    assert select_atom(ARGMAX, np.array([0.3, 0.7, 0.7])) == 1
    assert select_atom(kth_max(2), np.array([0.3, 0.7, 0.7])) == 2
    # NaN marks ineligible atoms
    assert select_atom(ARGMAX, np.array([np.nan, 0.1])) == 1


def test_select_random_rules():
    rng = np.random.default_rng(0)
    ratios = np.array([0.9, 0.01, 0.8, np.nan])
    picks = {select_atom(UNIFORM_RANDOM, ratios, rng=rng) for _ in range(200)}
    assert picks == {0, 1, 2}
    picks = {select_atom(DELTA_RANDOM, ratios, delta=0.5, rng=rng) for _ in range(200)}
    assert picks == {0, 2}
    with pytest.raises(ValueError):
        select_atom(DELTA_RANDOM, ratios, rng=rng)


def test_kth_max_under_threshold_falls_back():
    ratios = np.array([0.9, 0.2, 0.1])
    assert select_atom(kth_max(3), ratios, delta=0.15) == 1


def test_stop_examples():
    s = GreedyState([3.0, 1.0])
    s.append([1.0, 1.0], 0)
    assert should_stop(adaptive(0.5), s, SQ5, True) == Termination.RELATIVE_RESIDUAL
    assert should_stop(adaptive(0.1), s, SQ5, True) is None
    assert should_stop(adaptive(0.1), s, SQ5, False) == Termination.NO_ACTIVE_ATOM
    assert should_stop(fixed_k(1), s, SQ5, True) == Termination.K_LIMIT
    assert should_stop(fixed_k(2), s, SQ5, True) is None
    assert should_stop(threshold_plus_k(0.1, 1), s, SQ5, True) == Termination.K_LIMIT
    assert should_stop(threshold_only(0.1), s, SQ5, False) == Termination.NO_ACTIVE_ATOM


def test_rule_validation():
    with pytest.raises(ValueError):
        adaptive(0.0)
    with pytest.raises(ValueError):
        adaptive(1.5)
    with pytest.warns(UserWarning):
        adaptive(0.95)
    with pytest.raises(ValueError):
        GreedyConfig(DELTA_RANDOM, fixed_k(3))
    with pytest.raises(ValueError):
        kth_max(0)


def test_fit_worked_example():
    e = fit_greedy(GreedyConfig(ARGMAX, adaptive(0.1)), TOY_Z, TOY_D)
    assert e.k_final == 2
    np.testing.assert_array_equal(e.atom_indices, [0, 1])
    np.testing.assert_allclose(e.coefficients, [2.0, 1.0])
    assert e.residual_norms[-1] == pytest.approx(0.0, abs=1e-15)
    assert e.termination_reason == Termination.RELATIVE_RESIDUAL


def test_fit_high_threshold_gives_zero():
    with pytest.warns(UserWarning):
        cfg = GreedyConfig(DELTA_ARBITRARY, adaptive(0.95))
    e = fit_greedy(cfg, TOY_Z, TOY_D)
    assert e.k_final == 0 and e.coefficients.size == 0
    assert e.termination_reason == Termination.NO_ACTIVE_ATOM


def test_noiseless_sinc_sanity_band():
    z = gen_samples(SINC, 1000, 0.0, 0)
    d = build_rbf_dictionary(packing_centers(300, -math.pi, math.pi), 1.0, z.xs)
    e = fit_greedy(GreedyConfig(ARGMAX, fixed_k(9)), z, d)
    assert e.k_final == 9
    A = d.design[:, e.atom_indices]
    a_ref = np.linalg.lstsq(A, z.ys, rcond=None)[0]
    assert rmse(A @ a_ref, z.ys) < 0.05
    assert rmse(A @ e.coefficients, z.ys) == pytest.approx(rmse(A @ a_ref, z.ys), abs=1e-8)
    xt = np.linspace(-3, 3, 50)
    assert rmse(e.predict(d, xt), eval_target(SINC, xt)) < 0.05


def naive_oga(G, y, k):
    """Textbook orthogonal greedy: refit by least squares after each pick."""
    S, r = [], y.copy()
    for _ in range(k):
        corr = np.abs(G.T @ r)
        corr[S] = -1.0
        S.append(int(np.argmax(corr)))
        a = np.linalg.lstsq(G[:, S], y, rcond=None)[0]
        r = y - G[:, S] @ a
    return S, a


def _random_design(rng, m, n):
    G = rng.normal(size=(m, n))
    return G / np.sqrt(np.mean(G * G, axis=0)) * rng.uniform(0.3, 1.0, n)


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_argmax_matches_naive_oga(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(3, 21))
    n = int(rng.integers(2, 11))
    G = _random_design(rng, m, n)
    y = rng.normal(size=m)
    k = int(rng.integers(1, min(m, n) + 1))
    d = Dictionary.from_design(G)
    e = fit_greedy(GreedyConfig(ARGMAX, fixed_k(k)), SampleSet(np.arange(m), y), d)
    S, a = naive_oga(G, y, k)
    assert list(e.atom_indices) == S
    np.testing.assert_allclose(e.coefficients, a, atol=1e-8 * (np.abs(a).max() + 1))


RULES = [ARGMAX, kth_max(2), kth_max(3), UNIFORM_RANDOM, DELTA_ARBITRARY, DELTA_RANDOM]


def _cfg(rule, delta, seed, k=None):
    if rule.needs_delta:
        stop = threshold_plus_k(delta, k) if k else adaptive(delta)
    else:
        stop = fixed_k(k or 12)
    return GreedyConfig(rule, stop, seed=seed)


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(RULES), st.integers(-20, 20))
def test_selection_scale_equivariant(seed, rule, power):
    z, d = rbf_setup(m=60, n=20, seed=seed % 1000)
    c = 2.0 ** power
    zc = SampleSet(z.xs, z.ys * c)
    a = fit_greedy(_cfg(rule, 0.05, seed), z, d)
    b = fit_greedy(_cfg(rule, 0.05, seed), zc, d)
    np.testing.assert_array_equal(a.atom_indices, b.atom_indices)


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(RULES), st.floats(1e-4, 0.5))
def test_fit_invariants(seed, rule, delta):
    z, d = rbf_setup(m=80, n=30, sigma=0.3, seed=seed % 997)
    cfg = _cfg(rule, delta, seed)
    e = fit_greedy(cfg, z, d)
    again = fit_greedy(cfg, z, d)
    assert e.to_dict() == again.to_dict()
    assert len(set(e.atom_indices.tolist())) == e.k_final
    assert e.k_final <= min(d.n, z.m)
    norms = np.asarray(e.residual_norms)
    assert np.all(np.diff(norms) <= 1e-12 * norms[0])
    state = GreedyState(z.ys)
    for j in e.atom_indices:
        state.append(d.design[:, j], int(j))
    r = state.residual
    # selected atoms are orthogonal to the final residual
    if e.k_final:
        sel = np.abs(d.design[:, e.atom_indices].T @ r) / z.m
        assert sel.max() <= 1e-8 * emp_norm(z.ys)
    reason = e.termination_reason
    if reason == Termination.NO_ACTIVE_ATOM:
        ratios = np.abs(d.design.T @ r) / (z.m * emp_norm(r))
        assert np.all(ratios < delta)
    elif reason == Termination.RELATIVE_RESIDUAL:
        assert emp_norm(r) <= delta * emp_norm(z.ys) + 1e-12
    elif reason == Termination.K_LIMIT:
        assert e.k_final == cfg.stopping.k_max
    else:
        assert reason == Termination.DICTIONARY_EXHAUSTED and not rule.needs_delta


def test_path_prefixes_match_fixed_k():
    z, d = rbf_setup(m=150, n=40, sigma=0.2, seed=4)
    for rule in (ARGMAX, kth_max(2), UNIFORM_RANDOM):
        path = greedy_path(GreedyConfig(rule, fixed_k(10), seed=3), z, d)
        for k in (1, 4, 10):
            direct = fit_greedy(GreedyConfig(rule, fixed_k(k), seed=3), z, d)
            np.testing.assert_array_equal(path[k].atom_indices, direct.atom_indices)
            np.testing.assert_allclose(path[k].coefficients, direct.coefficients, rtol=1e-12)


def test_sweep_matches_direct_fits():
    z, d = rbf_setup(m=200, n=60, sigma=0.1, seed=9)
    deltas = np.geomspace(1e-6, 0.5, 25)
    for e_sweep, delta in zip(adaptive_argmax_sweep(z, d, deltas), deltas):
        e = fit_greedy(GreedyConfig(ARGMAX, adaptive(float(delta))), z, d)
        assert e_sweep.k_final == e.k_final
        assert e_sweep.termination_reason == e.termination_reason
        np.testing.assert_array_equal(e_sweep.atom_indices, e.atom_indices)
        np.testing.assert_allclose(e_sweep.coefficients, e.coefficients, rtol=1e-12)


def test_threshold_at_grid_top_selects_little():
    z = gen_samples(SINC, 1000, 0.1, 0)
    d = build_rbf_dictionary(packing_centers(300, -math.pi, math.pi), 1.0, z.xs)
    e = fit_greedy(GreedyConfig(ARGMAX, threshold_only(0.5)), z, d)
    assert e.k_final <= 1


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_error_certificate_random(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(5, 40))
    n = int(rng.integers(3, 25))
    z = SampleSet(rng.uniform(-3, 3, m), rng.normal(size=m) + np.sin(rng.uniform(-3, 3, m)))
    d = build_rbf_dictionary(np.linspace(-3, 3, n), rng.uniform(0.2, 2.0), z.xs,
                             normalize=bool(rng.integers(2)))
    delta = float(rng.uniform(1e-3, 0.5))
    rule = [ARGMAX, DELTA_ARBITRARY, DELTA_RANDOM][int(rng.integers(3))]
    cfg = GreedyConfig(rule, adaptive(delta), seed=seed)
    e = fit_greedy(cfg, z, d)
    for _ in range(5):
        h = rng.normal(size=n) * rng.exponential(2.0)
        assert error_certificate(e, z, d, h)
    assert error_certificate(e, z, d, np.zeros(n))


def test_error_certificate_exact_interpolant():
    e = fit_greedy(GreedyConfig(ARGMAX, adaptive(0.3)), TOY_Z, TOY_D)
    h = np.array([2.0, 1.0])
    r = TOY_Z.ys - TOY_D.design[:, e.atom_indices] @ e.coefficients
    assert emp_norm(r) <= 0.3 * np.abs(h).sum()
    assert error_certificate(e, TOY_Z, TOY_D, h)


def test_error_certificate_not_applicable_after_k_limit():
    e = fit_greedy(GreedyConfig(ARGMAX, fixed_k(1)), TOY_Z, TOY_D)
    with pytest.raises(NotApplicable):
        error_certificate(e, TOY_Z, TOY_D, np.zeros(2))


def test_predict_examples():
    z, d = rbf_setup(m=100, n=20, seed=1)
    zero = fit_greedy(GreedyConfig(ARGMAX, fixed_k(0)), z, d)
    np.testing.assert_array_equal(zero.predict(d, np.array([0.0, 1.0])), [0.0, 0.0])
    e = fit_greedy(GreedyConfig(ARGMAX, fixed_k(5), truncation_M=0.25), z, d)
    raw = e.raw_predict(d, z.xs)
    np.testing.assert_allclose(raw, d.design[:, e.atom_indices] @ e.coefficients, atol=1e-8)
    np.testing.assert_array_equal(e.predict(d, z.xs), np.clip(raw, -0.25, 0.25))
    assert predict(e, d, 0.0) == e.predict(d, np.array([0.0]))[0]
    other = build_rbf_dictionary(packing_centers(21, -np.pi, np.pi), 1.0, z.xs)
    with pytest.raises(ValueError):
        e.predict(other, z.xs)


def test_json_round_trip():
    z, d = rbf_setup(m=100, n=20, seed=2)
    e = fit_greedy(GreedyConfig(DELTA_RANDOM, adaptive(0.01), seed=5), z, d)
    back = Estimator.from_json(e.to_json())
    assert back.to_dict() == e.to_dict()
    assert set(json.loads(e.to_json())) == {"atom_indices", "coefficients", "k_final", "delta",
                                           "M", "termination_reason", "dictionary_fingerprint"}
    np.testing.assert_array_equal(back.predict(d, z.xs), e.predict(d, z.xs))


def test_zero_target_stops_cleanly():
    z = SampleSet([0.0, 1.0], [0.0, 0.0])
    e = fit_greedy(GreedyConfig(ARGMAX, adaptive(0.1)), z, TOY_D)
    assert e.k_final == 0 and e.termination_reason == Termination.RELATIVE_RESIDUAL
