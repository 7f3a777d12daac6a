import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratfair.moo import Candidate, CandidateSet
from stratfair.subset import (
    coverage_cost,
    hypervolume,
    results_to_csv,
    results_to_json,
    select_indices,
    select_subset,
)


def inclusion_exclusion_hv(points, ref):
    """Oracle: sum over non-empty subsets of (-1)^(|S|+1) * volume of the boxes' intersection."""
    total = 0.0
    for r in range(1, len(points) + 1):
        for S in itertools.combinations(points, r):
            corner = [max(p[k] for p in S) for k in range(len(ref))]
            vol = 1.0
            for c, R in zip(corner, ref):
                vol *= max(R - c, 0.0)
            total += (-1) ** (r + 1) * vol
    return total


def cost_oracle(points, S, norm, aggregate):
    vals = []
    for a in points:
        best = None
        for j in S:
            b = points[j]
            if norm == "sq":
                d = sum((x - y) ** 2 for x, y in zip(a, b))
            else:
                d = max(abs(x - y) for x, y in zip(a, b))
            best = d if best is None else min(best, d)
        vals.append(best)
    return sum(vals) if aggregate == "sum" else max(vals)


def brute_force_select(method, m, L, X, ref):
    """Oracle: score every m-subset in lexicographic order, keep the first optimum."""
    best_S, best = None, None
    for S in itertools.combinations(range(len(L)), m):
        if method == "hv":
            v = -inclusion_exclusion_hv([L[i] for i in S], ref)
        elif method == "igd":
            v = cost_oracle(L, S, "sq", "sum")
        elif method == "eps":
            v = cost_oracle(L, S, "cheb", "max")
        else:
            v = cost_oracle(X, S, "sq", "sum")
        if best is None or v < best - 1e-9 * max(1, abs(best)):
            best_S, best = S, v
    return best_S, (-best if method == "hv" else best)


def cset(L, X=None):
    L = np.asarray(L, dtype=float)
    X = np.asarray(L if X is None else X, dtype=float)
    return CandidateSet([Candidate(x, l, i) for i, (x, l) in enumerate(zip(X, L))], L.shape[1])


# -- hypervolume --------------------------------------------------------------------

def test_hv_examples():
    assert hypervolume([(1, 1)], (3, 3)) == 4
    assert hypervolume([(0, 2), (1, 1), (2, 0)], (3, 3)) == 6
    assert inclusion_exclusion_hv([(0, 2), (1, 1), (2, 0)], (3, 3)) == 6
    assert hypervolume([(0, 2), (1, 1), (1, 1), (2, 0)], (3, 3)) == 6


def test_hv_errors():
    with pytest.raises(ValueError, match="limited to 3 objectives"):
        hypervolume([(0, 0, 0, 0)], (1, 1, 1, 1))
    with pytest.raises(ValueError, match=r"\[3.0, 1.0\]"):
        hypervolume([(1, 1), (3, 1)], (3, 3))


@settings(deadline=None)
@given(st.integers(2, 3).flatmap(lambda d: st.lists(st.lists(st.integers(0, 9), min_size=d, max_size=d), min_size=1, max_size=7)))
def test_hv_matches_inclusion_exclusion(points):
    ref = [10] * len(points[0])
    assert hypervolume(points, ref) == pytest.approx(inclusion_exclusion_hv(points, ref), abs=1e-9)


@given(st.lists(st.tuples(st.floats(0, 9), st.floats(0, 9)), min_size=1, max_size=10), st.tuples(st.floats(0, 9), st.floats(0, 9)))
def test_hv_monotone_when_adding_points(points, extra):
    assert hypervolume(points + [extra], (10, 10)) >= hypervolume(points, (10, 10)) - 1e-9


# -- coverage costs -------------------------------------------------------------------

def test_coverage_examples():
    pts = [(0, 0), (3, 4)]
    assert coverage_cost(pts, [0, 1]) == 0
    assert coverage_cost(pts, [0]) == 25
    assert coverage_cost([(0, 0), (1, 2), (2, 1)], [0], "chebyshev", "max") == 2
    with pytest.raises(ValueError, match="empty subset"):
        coverage_cost(pts, [])


@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=2, max_size=8, unique=True), st.randoms())
def test_coverage_permutation_invariant_and_zero_iff_full(points, rnd):
    S = [0]
    perm = list(range(len(points)))
    rnd.shuffle(perm)
    shuffled = [points[i] for i in perm]
    S_shuffled = [perm.index(0)]
    assert coverage_cost(points, S) == coverage_cost(shuffled, S_shuffled)
    assert coverage_cost(points, S) > 0
    assert coverage_cost(points, range(len(points))) == 0


# -- selection ----------------------------------------------------------------------

def test_igd_single_point_scan():
    L = [(0, 0), (10, 10), (10.1, 9.9)]
    scan = [cost_oracle(L, [j], "sq", "sum") for j in range(3)]
    assert scan == pytest.approx([400.02, 200.02, 200.04])
    idx, value, _ = select_indices("igd", 1, L)
    assert idx == (int(np.argmin(scan)),) == (1,)
    assert value == pytest.approx(200.02)


def test_hv_pair_tie_goes_to_smallest_indices():
    L = [(0, 2), (1, 1), (2, 0)]
    values = [inclusion_exclusion_hv([L[i] for i in S], (3, 3)) for S in itertools.combinations(range(3), 2)]
    assert values == [5, 5, 5]
    idx, value, search = select_indices("hv", 2, L, reference=(3, 3))
    assert idx == (0, 1) and value == 5 and search == "exhaustive"


def test_m_equals_n_returns_everything():
    L = [(0, 3), (1, 2), (2, 1), (3, 0)]
    for method in ("hv", "igd", "cov", "eps", "domain-covering", "random"):
        chosen, res = select_subset(cset(L), 4, method, reference=(5, 5), rng=np.random.default_rng(0))
        assert sorted(res.indices) == [0, 1, 2, 3]
        assert len(chosen) == 4


def test_selection_errors():
    cs = cset([(0, 1), (1, 0)])
    with pytest.raises(ValueError, match="m=3"):
        select_subset(cs, 3, "igd")
    with pytest.raises(ValueError, match="reference"):
        select_subset(cs, 1, "hv")
    with pytest.raises(ValueError, match="unknown method"):
        select_subset(cs, 1, "nsga")


def test_front_only_vs_all_candidates():
    # the dominated point (5, 5) sits far from the front in domain space
    L = [(0, 1), (1, 0), (5, 5)]
    X = [(0.0,), (0.1,), (9.0,)]
    _, res = select_subset(cset(L, X), 2, "cov")
    assert 2 not in res.indices
    _, res = select_subset(cset(L, X), 2, "domain-covering")
    assert 2 in res.indices


@settings(deadline=None, max_examples=100)
@given(
    st.integers(2, 12).flatmap(
        lambda n: st.tuples(
            st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=n, max_size=n),
            st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=n, max_size=n),
            st.integers(1, min(4, n)),
            st.sampled_from(["hv", "igd", "eps", "cov"]),
        )
    )
)
def test_exhaustive_matches_brute_force(args):
    L, X, m, method = args
    ref = (21, 21)
    idx, value, search = select_indices(method, m, L, X, reference=ref)
    oracle_S, oracle_value = brute_force_select(method, m, L, X, ref)
    assert value == pytest.approx(oracle_value, rel=1e-9, abs=1e-9)
    assert idx == oracle_S


def test_greedy_is_deterministic_above_the_limit():
    rng = np.random.default_rng(0)
    L = rng.random((40, 2))
    a = select_indices("igd", 4, L, exhaustive_limit=10)
    b = select_indices("igd", 4, L, exhaustive_limit=10)
    assert a == b and a[2] == "greedy"
    exact = select_indices("igd", 4, L)
    assert exact[2] == "exhaustive"
    assert exact[1] <= a[1] + 1e-12


def test_random_marginals():
    L = np.column_stack([np.arange(6.0), 5 - np.arange(6.0)])
    cs = cset(L)
    rng = np.random.default_rng(1)
    counts = np.zeros(6)
    runs = 10_000
    for _ in range(runs):
        _, res = select_subset(cs, 2, "random", rng=rng)
        counts[list(res.indices)] += 1
    p = 2 / 6
    assert np.all(np.abs(counts / runs - p) <= 3 * np.sqrt(p * (1 - p) / runs))


def test_results_serialization():
    cs = cset([(0, 2), (1, 1), (2, 0)])
    results = [select_subset(cs, 2, m, reference=(3, 3))[1] for m in ("hv", "igd")]
    lines = results_to_csv(results).splitlines()
    assert lines[0] == "method,m,criterion_value,indices"
    assert lines[1].startswith("hv,2,5.0,")
    assert json.loads(results_to_json(results))[0]["indices"] == [0, 1]
