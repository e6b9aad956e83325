from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mvtrack.assignment import INFEASIBLE, gate_costs, solve
from oracles import brute_min_cost, brute_partial


def test_zero_diagonal():
    res = solve([[0, 5], [5, 0]])
    assert set(res.pairs) == {(0, 0), (1, 1)}
    assert res.cost == 0


def test_two_by_two_anti_diagonal():
    # both permutations by hand: 4 + 3 = 7 versus 1 + 2 = 3
    res = solve([[4, 1], [2, 3]])
    assert set(res.pairs) == {(0, 1), (1, 0)}
    assert res.cost == 3


def test_rectangular_with_infeasible_matches_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        c = rng.uniform(0, 10, size=(3, 2))
        c[rng.integers(3), rng.integers(2)] = INFEASIBLE
        res = solve(c)
        k, cost = brute_partial(c)
        assert len(res.pairs) == k
        assert res.cost == pytest.approx(cost, abs=1e-9)


def test_unmatched_are_reported():
    res = solve([[1.0, INFEASIBLE], [INFEASIBLE, INFEASIBLE], [2.0, INFEASIBLE]])
    assert res.pairs == ((0, 0),)
    assert res.unmatched_rows == (1, 2)
    assert res.unmatched_cols == (1,)


def test_empty_inputs():
    assert solve(np.zeros((0, 3))).unmatched_cols == (0, 1, 2)
    assert solve(np.zeros((2, 0))).unmatched_rows == (0, 1)
    assert solve(np.zeros((0, 0))).pairs == ()


def test_full_infeasible_row_does_not_pollute_total():
    res = solve([[INFEASIBLE, INFEASIBLE], [1.0, 2.0]])
    assert res.pairs == ((1, 0),)
    assert res.cost == 1.0


def test_gate_costs_boundary():
    out = gate_costs([[1.4, 1.6]], 1.5)
    assert out[0, 0] == 1.4 and out[0, 1] == INFEASIBLE


def test_gate_noop_and_all_infeasible():
    c = np.array([[0.2, 1.5], [0.7, 0.0]])
    np.testing.assert_array_equal(gate_costs(c, 1.5), c)
    g = gate_costs(c + 2.0, 1.5)
    assert np.isinf(g).all()
    assert solve(g).pairs == ()


@pytest.mark.parametrize("bad", [[[-1.0]], [[np.nan]], [[-np.inf]]])
def test_rejects_invalid_costs(bad):
    with pytest.raises(ValueError):
        solve(bad)


def test_gate_must_be_positive():
    with pytest.raises(ValueError):
        gate_costs([[1.0]], 0.0)


def test_equal_costs_resolve_deterministically():
    res = solve(np.ones((4, 4)))
    assert res.pairs == ((0, 0), (1, 1), (2, 2), (3, 3))
    assert solve(np.ones((4, 4))) == res


costs = st.integers(1, 7).flatmap(
    lambda n: st.integers(1, 7).flatmap(
        lambda m: arrays(np.float64, (n, m), elements=st.floats(0, 100, allow_nan=False, width=32))
    )
)


@settings(max_examples=300, deadline=None)
@given(costs)
def test_total_equals_exhaustive_minimum(c):
    res = solve(c)
    assert len(res.pairs) == min(c.shape)
    assert res.cost == pytest.approx(brute_min_cost(c), rel=1e-12, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)),
           elements=st.one_of(st.floats(0, 50, allow_nan=False, width=32), st.just(np.inf)))
)
def test_partial_feasibility_matches_exhaustive(c):
    res = solve(c)
    k, cost = brute_partial(c)
    assert len(res.pairs) == k
    assert res.cost == pytest.approx(cost, abs=1e-6)
    assert all(np.isfinite(c[i, j]) for i, j in res.pairs)


square = st.integers(1, 6).flatmap(lambda n: arrays(np.float64, (n, n), elements=st.floats(0, 1, width=32)))


@settings(max_examples=150, deadline=None)
@given(square, st.floats(0, 100))
def test_constant_shift_keeps_pairs(c, k):
    a = solve(c)
    b = solve(c + k)
    assert a.cost + k * c.shape[0] == pytest.approx(b.cost, rel=1e-9, abs=1e-6)
    if _unique_optimum(c):
        assert a.pairs == b.pairs


def _unique_optimum(c) -> bool:
    from oracles import injections

    n = c.shape[0]
    totals = np.sort(c[np.arange(n), injections(n, n)].sum(axis=1))
    return len(totals) == 1 or totals[1] - totals[0] > 1e-6


def test_row_permutation_permutes_assignment():
    rng = np.random.default_rng(3)
    for _ in range(100):
        c = rng.uniform(0, 1, size=(5, 6))
        perm = rng.permutation(5)
        a = solve(c).as_dict()
        b = solve(c[perm]).as_dict()
        assert all(b[i] == a[perm[i]] for i in range(5))
