import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stratfair.moo import (
    Candidate,
    CandidateSet,
    MultiObjectiveProblem,
    dominates,
    minimize_batch,
    msr_generate,
    optimize_scalar,
    pareto_front,
    pareto_mask,
    sample_simplex_weights,
)

vec3 = st.lists(st.integers(0, 3), min_size=3, max_size=3)


def brute_force_front(L):
    keep = []
    for i, a in enumerate(L):
        dominated = False
        for j, b in enumerate(L):
            if j != i and all(x <= y for x, y in zip(b, a)) and any(x < y for x, y in zip(b, a)):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep


def cset(L, X=None):
    L = np.asarray(L, dtype=float)
    X = np.zeros((len(L), 1)) if X is None else np.asarray(X, dtype=float)
    return CandidateSet([Candidate(x, l, i) for i, (x, l) in enumerate(zip(X, L))], L.shape[1])


def split_problem(threshold=0.3):
    return MultiObjectiveProblem(
        losses=lambda X: np.column_stack([X[:, 0] ** 2, (1 - X[:, 0]) ** 2]),
        n_objectives=2,
        lower=[0.0],
        upper=[1.0],
        classify=lambda X: np.where(X[:, 0] < threshold, "C", "other"),
    )


def test_dominates_examples():
    assert dominates((1, 1), (2, 2))
    assert not dominates((1, 2), (2, 1))
    assert not dominates((1, 1), (1, 1))
    with pytest.raises(ValueError, match="differ in length"):
        dominates((1, 2), (1, 2, 3))


@given(vec3, vec3, vec3)
def test_dominance_is_strict_partial_order(a, b, c):
    assert not dominates(a, a)
    assert not (dominates(a, b) and dominates(b, a))
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


def test_front_examples():
    front = pareto_front(cset([(1, 2), (2, 1), (2, 2)]))
    assert front.L.tolist() == [[1, 2], [2, 1]]
    assert pareto_front(cset([(5, 5)])).L.tolist() == [[5, 5]]
    with pytest.raises(ValueError, match="empty"):
        pareto_front(CandidateSet([], 2))


def test_front_keeps_duplicates():
    assert pareto_mask(np.array([[1, 1], [1, 1], [2, 2]])).tolist() == [True, True, False]


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=40))
def test_front_matches_brute_force(L):
    L = np.array(L, dtype=float)
    assert np.flatnonzero(pareto_mask(L)).tolist() == brute_force_front(L.tolist())


def test_front_random_100():
    L = np.random.default_rng(0).random((100, 2))
    mask = pareto_mask(L)
    assert np.flatnonzero(mask).tolist() == brute_force_front(L.tolist())
    for j in np.flatnonzero(~mask):
        assert any(dominates(L[i], L[j]) for i in np.flatnonzero(mask))


def test_candidate_set_serialization():
    cs = cset([(0.5, 1.5), (2.0, 0.25)], X=[(1.0, 2.0), (3.0, 4.0)])
    text = cs.to_csv()
    assert text.splitlines()[0] == "run_id,x0,x1,f1,f2"
    back = CandidateSet.from_csv(text)
    assert np.array_equal(back.X, cs.X) and np.array_equal(back.L, cs.L)
    again = CandidateSet.from_json(cs.to_json())
    assert np.array_equal(again.L, cs.L)
    with pytest.raises(ValueError, match="non-finite"):
        cset([(np.nan, 1.0)])


def test_simplex_weights():
    rng = np.random.default_rng(0)
    W = np.array([sample_simplex_weights(rng, 3) for _ in range(20_000)])
    assert np.allclose(W.sum(axis=1), 1.0)
    # uniform on the 2-simplex: each coordinate is Beta(1, 2) with mean 1/3
    assert np.allclose(W.mean(axis=0), 1 / 3, atol=0.01)


def test_budget_one_is_a_prior_draw():
    prob = split_problem()
    rng_a, rng_b = np.random.default_rng(5), np.random.default_rng(5)
    for opt in ("random-search", "discrete-1+1", "gaussian-es"):
        c = optimize_scalar(prob, [0.5, 0.5], opt, 1, rng_a)
        assert c.x.tolist() == prob.sample_prior(rng_b, 1)[0].tolist()


def test_single_objective_sanity():
    prob = MultiObjectiveProblem(
        losses=lambda X: np.column_stack([((X - 0.3) ** 2).sum(axis=1), np.zeros(len(X))]),
        n_objectives=2,
        lower=[-1, -1],
        upper=[1, 1],
    )
    for opt in ("random-search", "gaussian-es"):
        c = optimize_scalar(prob, [1.0, 0.0], opt, 400, np.random.default_rng(1))
        assert np.allclose(c.x, 0.3, atol=0.1)


def test_random_search_monotone_in_budget():
    sphere = lambda X: (X**2).sum(axis=1)
    prior = lambda rng, n: rng.uniform(-1, 1, (n, 3))
    means = []
    for budget in (1, 4, 16, 64):
        _, f = minimize_batch(sphere, prior, -np.ones(3), np.ones(3), "random-search", budget, np.random.default_rng(2), n_runs=2000)
        means.append(f.mean())
    assert all(a > b for a, b in zip(means, means[1:]))


def test_minimize_batch_archive_counts_every_evaluation():
    arch = []
    minimize_batch(lambda X: X[:, 0], lambda r, n: r.random((n, 1)), [0.0], [1.0], "gaussian-es", 7, np.random.default_rng(0), n_runs=3, archive=arch)
    assert sum(len(v) for _, v in arch) == 21


def test_argument_errors():
    prob = split_problem()
    with pytest.raises(ValueError, match="simplex"):
        optimize_scalar(prob, [0.7, 0.7], "random-search", 3, np.random.default_rng(0))
    with pytest.raises(ValueError, match="unknown optimizer"):
        optimize_scalar(prob, [0.5, 0.5], "cma", 3, np.random.default_rng(0))
    with pytest.raises(ValueError, match="budget"):
        optimize_scalar(prob, [0.5, 0.5], "random-search", 0, np.random.default_rng(0))
    with pytest.raises(ValueError, match="k must be"):
        msr_generate(prob, 0, "random-search", 3, np.random.default_rng(0))
    with pytest.raises(ValueError, match="bounds"):
        MultiObjectiveProblem(lambda X: X, 2, [1.0], [0.0])


def test_msr_prior_only_gives_iid_draws():
    prob = split_problem()
    cs = msr_generate(prob, 5, "random-search", 1, np.random.default_rng(3))
    xs = cs.X[:, 0]
    assert len(cs) == 5 and len(set(xs.tolist())) == 5
    assert [c.run_id for c in cs] == list(range(5))


def test_msr_is_deterministic():
    prob = split_problem()
    a = msr_generate(prob, 4, "gaussian-es", 10, np.random.default_rng(7))
    b = msr_generate(prob, 4, "gaussian-es", 10, np.random.default_rng(7))
    assert np.array_equal(a.X, b.X) and a.labels == b.labels


def test_msr_pool_collects_all_evaluations():
    pool = []
    msr_generate(split_problem(), 3, "discrete-1+1", 6, np.random.default_rng(0), pool=pool)
    assert len(pool) == 18


def test_msr_at_least_one_in_class_follows_formula():
    # prior-only runs land in C with probability exactly 0.3
    prob = split_problem(0.3)
    rng = np.random.default_rng(11)
    n = 1000
    hits9 = sum("C" in msr_generate(prob, 9, "random-search", 1, rng).labels for _ in range(n))
    hits1 = sum("C" in msr_generate(prob, 1, "random-search", 1, rng).labels for _ in range(n))
    p9 = 1 - 0.7**9
    assert abs(hits9 / n - p9) <= 3 * np.sqrt(p9 * (1 - p9) / n)
    assert abs(hits1 / n - 0.3) <= 3 * np.sqrt(0.21 / n)
    assert hits9 > hits1
