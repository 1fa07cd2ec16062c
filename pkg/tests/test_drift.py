import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from levylibor.driver import LevyDriverSpec, NigParams, jump_integral_quadrature
from levylibor.drift import (
    DriftCost,
    DriftEvaluator,
    DriftInputs,
    DriftMode,
    DriftSizeError,
    brownian_drift,
    drift_cost,
    elementary_symmetric,
    elementary_symmetric_all,
    jump_drift,
    jump_drift_first_order,
    jump_drift_full,
    jump_drift_second_order,
    total_drift,
)
from oracles import W0

SPEC = LevyDriverSpec()
KAPPA = SPEC.jump_cumulant


def quadrature_drift(li, w, lam, spec=SPEC):
    """Jump drift as a Lévy-measure integral of the measure-change product."""

    def f(x):
        prod = np.ones_like(x)
        for wl, ll in zip(w, lam):
            prod = prod * (1.0 + wl * np.expm1(ll * x))
        return np.expm1(li * x) * prod - li * x

    return jump_integral_quadrature(spec, f)


def inputs(n, w=None, lam=0.18, li=0.18):
    w = np.full(n, W0) if w is None else np.asarray(w)
    return DriftInputs(li, w, np.full(n, lam) if np.isscalar(lam) else np.asarray(lam), KAPPA)


# elementary symmetric polynomials ---------------------------------------------------


@given(st.lists(st.floats(0.0, 0.05), min_size=0, max_size=12))
def test_product_equals_sum_of_elementary_symmetric(xs):
    e = elementary_symmetric_all(xs)
    prod = math.prod(1.0 + x for x in xs)
    assert abs(prod - e.sum()) <= 1e-12 * prod


def test_elementary_symmetric_by_enumeration(rng):
    x = rng.uniform(-1, 1, 7)
    for k in range(8):
        brute = sum(math.prod(c) for c in itertools.combinations(x, k))
        assert elementary_symmetric(x, k) == pytest.approx(brute, abs=1e-13)
    with pytest.raises(ValueError):
        elementary_symmetric(x, 8)


def test_elementary_symmetric_batched(rng):
    x = rng.uniform(0, 1, (4, 5))
    e = elementary_symmetric_all(x, 3)
    assert e.shape == (4, 4)
    for r in range(4):
        assert np.allclose(e[r], elementary_symmetric_all(x[r])[:4])


# drift formulas ---------------------------------------------------------------------


@pytest.mark.parametrize("n", range(1, 9))
def test_full_drift_matches_quadrature(n):
    inp = inputs(n)
    assert abs(jump_drift_full(inp) - quadrature_drift(0.18, inp.weights, inp.loadings)) <= 1e-7


@given(st.integers(1, 6), st.data())
def test_full_drift_matches_quadrature_random(n, data):
    w = data.draw(st.lists(st.floats(0.0, 0.05), min_size=n, max_size=n))
    lam = data.draw(st.lists(st.floats(0.0, 0.5), min_size=n, max_size=n))
    li = data.draw(st.floats(0.01, 0.5))
    got = jump_drift_full(DriftInputs(li, w, lam, KAPPA))
    assert abs(got - quadrature_drift(li, w, lam)) <= 1e-7


def test_full_drift_with_skewed_driver():
    spec = LevyDriverSpec(NigParams(10.0, -2.0, 0.05, 4.0))
    w, lam = [0.02, 0.03, 0.01], [0.3, 0.25, 0.2]
    got = jump_drift_full(DriftInputs(0.3, w, lam, spec.jump_cumulant))
    assert abs(got - quadrature_drift(0.3, w, lam, spec)) <= 1e-7


def test_no_subsequent_rates():
    inp = inputs(0)
    for mode in ("full", "first_order", "second_order"):
        assert jump_drift(inp, mode) == pytest.approx(KAPPA(0.18), rel=1e-14)


def test_one_subsequent_rate_by_hand():
    w, li, ll = 0.03, 0.2, 0.15
    expected = KAPPA(li) + w * (KAPPA(li + ll) - KAPPA(li) - KAPPA(ll))
    inp = DriftInputs(li, [w], [ll], KAPPA)
    for f in (jump_drift_full, jump_drift_first_order, jump_drift_second_order):
        assert f(inp) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2])
def test_second_order_exact_for_two_or_fewer(n, rng):
    for _ in range(20):
        inp = DriftInputs(0.18, rng.uniform(0, 0.05, n), rng.uniform(0, 0.4, n), KAPPA)
        assert abs(jump_drift_second_order(inp) - jump_drift_full(inp)) <= 1e-12


def test_truncation_error_ordering(rng):
    for n in range(1, 9):
        for _ in range(25):
            inp = DriftInputs(0.18, rng.uniform(0, 0.05, n), np.full(n, 0.18), KAPPA)
            exact = jump_drift_full(inp)
            e1 = abs(jump_drift_first_order(inp) - exact)
            e2 = abs(jump_drift_second_order(inp) - exact)
            assert e2 <= e1 + 1e-15


def test_truncation_errors_shrink_with_weights():
    big, small = inputs(8, np.full(8, 0.04)), inputs(8, np.full(8, 0.02))
    err = lambda inp, f: abs(f(inp) - jump_drift_full(inp))  # noqa: E731
    # O(w^2) and O(w^3): halving w divides the errors by about 4 and 8
    assert err(big, jump_drift_first_order) / err(small, jump_drift_first_order) == pytest.approx(4, rel=0.1)
    assert err(big, jump_drift_second_order) / err(small, jump_drift_second_order) == pytest.approx(8, rel=0.1)


def test_size_guard():
    with pytest.raises(DriftSizeError):
        jump_drift_full(inputs(26))
    with pytest.raises(DriftSizeError):
        jump_drift_full(inputs(6), max_subsequent=5)
    with pytest.raises(DriftSizeError):
        DriftEvaluator(np.full(27, 0.18), KAPPA, order=None, grouping="none")
    DriftEvaluator(np.full(27, 0.18), KAPPA, order=None)  # grouped evaluation has no 2^n blow-up


def test_frozen_uses_initial_weights():
    inp = DriftInputs(0.18, [0.04, 0.04], [0.18, 0.18], KAPPA, initial_weights=[W0, W0])
    ref = DriftInputs(0.18, [W0, W0], [0.18, 0.18], KAPPA)
    assert total_drift(inp, "frozen") == total_drift(ref, "full")
    with pytest.raises(ValueError):
        DriftInputs(0.18, [0.1], [0.1, 0.2], KAPPA)


def test_brownian_part():
    inp = DriftInputs(0.2, [0.1, 0.05], [0.3, 0.1], KAPPA, diffusion=0.5)
    assert brownian_drift(inp) == pytest.approx(-0.5 * 0.04 * 0.5 - 0.5 * 0.2 * (0.03 + 0.005))
    assert total_drift(inp, "full") == pytest.approx(brownian_drift(inp) - jump_drift_full(inp))


# cost model ----------------------------------------------------------------------


def test_cost_counters():
    for n in range(0, 21):
        full = drift_cost(n, "full")
        assert full.cumulant_evals == 2 * 3**n - 2**n
        assert full.product_terms == 2**n
        assert full.cumulant_evals >= 2**n
        assert drift_cost(n, "second_order").cumulant_evals == 1 + 3 * n + 7 * math.comb(n, 2)
    assert drift_cost(11, "full").product_terms / drift_cost(10, "full").product_terms == 2
    ratio = drift_cost(20, "second_order").cumulant_evals / drift_cost(10, "second_order").cumulant_evals
    assert ratio == pytest.approx(4, rel=0.05)


def test_cost_counted_by_formulas():
    c = DriftCost()
    jump_drift_full(inputs(4), cost=c)
    jump_drift_second_order(inputs(4), cost=c)
    assert c.cumulant_evals == drift_cost(4, "full").cumulant_evals + drift_cost(4, "second_order").cumulant_evals
    assert c.scaled(3).product_terms == 3 * c.product_terms


# vectorised evaluator --------------------------------------------------------------


def reference_drifts(lam, w, mode, diffusion=0.0):
    out = np.empty_like(w)
    for k in range(w.shape[0]):
        for p in range(w.shape[1]):
            inp = DriftInputs(lam[p], w[k, p + 1 :], lam[p + 1 :], KAPPA, diffusion=diffusion)
            out[k, p] = total_drift(inp, mode)
    return out


@pytest.mark.parametrize("mode", ["full", "first_order", "second_order"])
@pytest.mark.parametrize("grouping", ["value", "none"])
@pytest.mark.parametrize("kind", ["flat", "three_values", "distinct"])
def test_evaluator_matches_reference(mode, grouping, kind, rng):
    n = 9
    lam = {
        "flat": np.full(n, 0.18),
        "three_values": rng.choice([0.1, 0.2, 0.3], n),
        "distinct": rng.uniform(0.05, 0.3, n),
    }[kind]
    w = rng.uniform(0, 0.05, (4, n))
    ev = DriftEvaluator(lam, KAPPA, order=DriftMode(mode).order, diffusion=0.3, grouping=grouping)
    assert np.allclose(ev.all_drifts(w), reference_drifts(lam, w, mode, 0.3), rtol=0, atol=1e-15)


def test_evaluator_exact_at_desk_scale(rng):
    lam = np.full(20, 0.18)
    w = rng.uniform(0, 0.05, (2, 20))
    ev = DriftEvaluator(lam, KAPPA, order=None)
    got = ev.all_drifts(w)
    for p in (0, 5, 12):  # 19, 14 and 7 subsequent rates through the literal expansion
        inp = DriftInputs(0.18, w[0, p + 1 :], lam[p + 1 :], KAPPA)
        assert got[0, p] == pytest.approx(-jump_drift_full(inp), abs=1e-15)


def test_evaluator_batch_invariance(rng):
    lam = np.full(12, 0.18)
    w = rng.uniform(0, 0.05, (7, 12))
    ev = DriftEvaluator(lam, KAPPA, order=None)
    whole = ev.all_drifts(w)
    for k in range(7):
        assert np.array_equal(ev.all_drifts(w[k : k + 1]), whole[k : k + 1])


def test_truncated_literal_evaluator_is_polynomial(rng):
    lam = rng.uniform(0.1, 0.3, 30)  # distinct loadings: 29 singleton groups
    w = rng.uniform(0, 0.05, (3, 30))
    literal = DriftEvaluator(lam, KAPPA, order=2, grouping="none")
    grouped = DriftEvaluator(lam, KAPPA, order=2)
    assert literal.n_terms(0) == 1 + 29 + math.comb(29, 2)
    assert np.allclose(literal.all_drifts(w), grouped.all_drifts(w), rtol=0, atol=1e-15)
