"""Choosing ``m`` representatives from a candidate set.

Criteria (for a chosen index set ``S`` of the points considered):

* ``hv``: hypervolume of ``{F(x_j), j in S}`` against a reference point, maximized;
* ``igd``: ``sum_i min_{j in S} ||F(x_i) - F(x_j)||^2``, minimized;
* ``cov``: the same sum with domain points ``x`` instead of losses;
* ``eps``: ``max_i min_{j in S} ||F(x_i) - F(x_j)||_inf``, minimized;
* ``domain-covering``: ``cov`` over every candidate instead of the front;
* ``random``: uniform without replacement.

All methods except ``domain-covering`` work on the Pareto front only.
Search is exhaustive while the number of subsets stays under a budget,
greedy (best single addition) beyond it. Ties go to the lexicographically
smallest index sequence.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .moo import CandidateSet, pareto_mask

METHODS = ("random", "hv", "igd", "cov", "eps", "domain-covering")
EXHAUSTIVE_LIMIT = 100_000


def _hv2d(P: np.ndarray, ref: np.ndarray) -> float:
    P = P[np.lexsort((P[:, 1], P[:, 0]))]
    area, best_y = 0.0, ref[1]
    xs, ys = [], []
    for x, y in P:
        if y < best_y:
            xs.append(x)
            ys.append(y)
            best_y = y
    xs.append(ref[0])
    for i in range(len(ys)):
        area += (xs[i + 1] - xs[i]) * (ref[1] - ys[i])
    return area


def hypervolume(points, reference) -> float:
    """Exact hypervolume of the union of boxes ``[point, reference]`` for 2 or 3 objectives.

    Raises:
        ValueError: if a point is not strictly below the reference in every
            coordinate, or if there are more than 3 objectives.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    ref = np.asarray(reference, dtype=float)
    if P.shape[1] > 3:
        raise ValueError("exact HV limited to 3 objectives")
    if P.shape[1] < 2 or ref.shape != (P.shape[1],):
        raise ValueError(f"points and reference must share dimension 2 or 3, got {P.shape} and {ref.shape}")
    bad = np.flatnonzero(~np.all(P < ref, axis=1))
    if bad.size:
        raise ValueError(f"point {P[bad[0]].tolist()} is not strictly below the reference {ref.tolist()}")
    if P.shape[1] == 2:
        return float(_hv2d(P, ref))
    # 3-D: sweep along the last objective, integrating 2-D slice areas
    P = P[np.argsort(P[:, 2], kind="stable")]
    zs = np.append(np.unique(P[:, 2]), ref[2])
    vol = 0.0
    for z_lo, z_hi in zip(zs[:-1], zs[1:]):
        vol += _hv2d(P[P[:, 2] <= z_lo, :2], ref[:2]) * (z_hi - z_lo)
    return float(vol)


def _pairwise(A: np.ndarray, norm: str) -> np.ndarray:
    diff = A[:, None, :] - A[None, :, :]
    if norm == "sq-euclidean":
        return (diff**2).sum(axis=2)
    if norm == "chebyshev":
        return np.abs(diff).max(axis=2)
    raise ValueError(f"unknown norm {norm!r}")


def coverage_cost(points, subset: Sequence[int], norm: str = "sq-euclidean", aggregate: str = "sum") -> float:
    """Aggregate over all points of the distance to the nearest chosen point.

    ``points`` are rows in loss or domain space, ``subset`` indexes them.
    """
    A = np.atleast_2d(np.asarray(points, dtype=float))
    S = list(subset)
    if not S:
        raise ValueError("empty subset")
    if aggregate not in ("sum", "max"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    D = _pairwise(A, norm)[:, S].min(axis=1)
    return float(D.sum() if aggregate == "sum" else D.max())


@dataclass(frozen=True)
class SubsetResult:
    """Chosen indices (into the source candidate set) and the achieved criterion."""

    method: str
    m: int
    indices: tuple
    criterion_value: float
    search: str

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "m": self.m,
            "criterion_value": float(self.criterion_value),
            "indices": list(self.indices),
            "search": self.search,
        }

    def csv_row(self) -> list:
        return [self.method, self.m, repr(float(self.criterion_value)), " ".join(map(str, self.indices))]


def results_to_csv(results: Sequence[SubsetResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "m", "criterion_value", "indices"])
    for r in results:
        w.writerow(r.csv_row())
    return buf.getvalue()


def results_to_json(results: Sequence[SubsetResult]) -> str:
    return json.dumps([r.to_dict() for r in results])


def _criterion(method: str, L: np.ndarray, X: np.ndarray | None, reference):
    """Return ``(score(S), maximize)`` for a pool of points."""
    if method == "hv":
        if reference is None:
            raise ValueError("hv requires a reference point")
        ref = np.asarray(reference, dtype=float)
        hypervolume(L, ref)  # validates every point against the reference
        return (lambda S: hypervolume(L[list(S)], ref)), True
    if method in ("igd", "eps"):
        D = _pairwise(L, "sq-euclidean" if method == "igd" else "chebyshev")
    else:
        if X is None or X.size == 0:
            raise ValueError(f"{method} needs domain points")
        D = _pairwise(X, "sq-euclidean")
    agg = np.max if method == "eps" else np.sum
    return (lambda S: float(agg(D[:, list(S)].min(axis=1)))), False


def _better(val: float, best: float, maximize: bool) -> bool:
    tol = 1e-12 * max(1.0, abs(best))
    return val > best + tol if maximize else val < best - tol


def _greedy_generic(score, n: int, m: int, maximize: bool) -> list[int]:
    chosen: list[int] = []
    for _ in range(m):
        step_best, step_i = None, None
        for i in range(n):
            if i in chosen:
                continue
            v = score(chosen + [i])
            if step_best is None or _better(v, step_best, maximize):
                step_best, step_i = v, i
        chosen.append(step_i)
    return chosen


def _greedy_cover(method: str, L: np.ndarray, X: np.ndarray | None, m: int) -> list[int]:
    """Best single addition for coverage costs, vectorized over all candidates."""
    A = L if method in ("igd", "eps") else X
    D = _pairwise(A, "chebyshev" if method == "eps" else "sq-euclidean")
    agg = np.max if method == "eps" else np.sum
    n = D.shape[0]
    current = np.full(n, np.inf)
    chosen: list[int] = []
    for _ in range(m):
        costs = agg(np.minimum(current[:, None], D), axis=0)
        costs[chosen] = np.inf
        best = costs.min()
        tol = 1e-12 * max(1.0, abs(best))
        i = int(np.flatnonzero(costs <= best + tol)[0])
        chosen.append(i)
        current = np.minimum(current, D[:, i])
    return chosen


def select_indices(
    method: str,
    m: int,
    losses,
    xs=None,
    reference=None,
    rng: np.random.Generator | None = None,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
) -> tuple[tuple, float, str]:
    """Optimize a selection criterion over one pool of points (no front filtering).

    Returns:
        ``(indices, criterion_value, search)`` where ``search`` is
        ``"exhaustive"``, ``"greedy"``, ``"random"`` or ``"all"``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    L = np.atleast_2d(np.asarray(losses, dtype=float))
    X = None if xs is None else np.atleast_2d(np.asarray(xs, dtype=float))
    n = L.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"m={m} must be between 1 and the pool size {n}")
    if method == "random":
        if rng is None:
            raise ValueError("random selection needs a seeded rng")
        idx = tuple(int(i) for i in sorted(rng.choice(n, size=m, replace=False)))
        return idx, float("nan"), "random"
    score, maximize = _criterion(method, L, X, reference)
    if m == n:
        full = tuple(range(n))
        return full, score(full), "all"
    if math.comb(n, m) <= exhaustive_limit:
        best_S, best = None, None
        for S in itertools.combinations(range(n), m):
            v = score(S)
            if best is None or _better(v, best, maximize):
                best_S, best = S, v
        return best_S, best, "exhaustive"
    if maximize:
        chosen = _greedy_generic(score, n, m, maximize)
    else:
        chosen = _greedy_cover(method, L, X, m)
    S = tuple(sorted(chosen))
    return S, score(S), "greedy"


def select_subset(
    source: CandidateSet,
    m: int,
    method: str,
    reference=None,
    rng: np.random.Generator | None = None,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
) -> tuple[CandidateSet, SubsetResult]:
    """Pick ``m`` representatives of ``source`` with one of :data:`METHODS`.

    Every method but ``domain-covering`` restricts the pool to the Pareto
    front of ``source``; if the front has fewer than ``m`` points, the whole
    front is returned. Domain distances use raw ``x``; normalize beforehand
    when coordinates have different scales.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    n = len(source)
    if not 1 <= m <= n:
        raise ValueError(f"m={m} must be between 1 and the candidate count {n}")
    if method == "hv" and reference is None:
        raise ValueError("hv requires a reference point")
    if method == "domain-covering":
        pool = np.arange(n)
    else:
        pool = np.flatnonzero(pareto_mask(source.L))
    L = source.L[pool]
    X = source.X[pool] if method in ("cov", "domain-covering") else None
    m_eff = min(m, len(pool))
    local, value, search = select_indices(method, m_eff, L, X, reference, rng, exhaustive_limit)
    idx = tuple(int(pool[i]) for i in local)
    return source.subset(idx), SubsetResult(method, m, idx, value, search)
