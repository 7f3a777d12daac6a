"""Multi-objective candidate generation: dominance, Pareto fronts and multiple single runs.

All losses are minimized. A problem exposes a vectorized loss map
``X (n, dim) -> L (n, N)``; maximization objectives must be negated by the
caller.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

OPTIMIZERS = ("random-search", "discrete-1+1", "gaussian-es")


@dataclass(frozen=True)
class Candidate:
    x: np.ndarray
    losses: np.ndarray
    run_id: int = 0


@dataclass
class CandidateSet:
    """Domain points with their loss vectors.

    ``labels`` optionally carries hidden class labels aligned with
    ``candidates``; selectors never read it.
    """

    candidates: list
    objective_count: int
    labels: list | None = field(default=None, repr=False)

    def __post_init__(self):
        for c in self.candidates:
            if len(c.losses) != self.objective_count:
                raise ValueError(
                    f"candidate {c.run_id} has {len(c.losses)} losses, expected {self.objective_count}"
                )
            if not np.all(np.isfinite(c.losses)):
                raise ValueError(f"candidate {c.run_id} has non-finite losses")
        if self.labels is not None and len(self.labels) != len(self.candidates):
            raise ValueError("labels must align with candidates")

    def __len__(self) -> int:
        return len(self.candidates)

    def __getitem__(self, i) -> Candidate:
        return self.candidates[i]

    @property
    def X(self) -> np.ndarray:
        return np.array([c.x for c in self.candidates], dtype=float)

    @property
    def L(self) -> np.ndarray:
        return np.array([c.losses for c in self.candidates], dtype=float).reshape(len(self), self.objective_count)

    def subset(self, indices: Sequence[int]) -> "CandidateSet":
        idx = list(indices)
        labels = None if self.labels is None else [self.labels[i] for i in idx]
        return CandidateSet([self.candidates[i] for i in idx], self.objective_count, labels)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        dim = len(self.candidates[0].x) if self.candidates else 0
        w.writerow(["run_id"] + [f"x{j}" for j in range(dim)] + [f"f{j + 1}" for j in range(self.objective_count)])
        for c in self.candidates:
            w.writerow([c.run_id] + [repr(float(v)) for v in c.x] + [repr(float(v)) for v in c.losses])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CandidateSet":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows or rows[0][0] != "run_id":
            raise ValueError("candidate CSV must start with a 'run_id' header column")
        header = rows[0]
        xcols = [j for j, h in enumerate(header) if h.startswith("x")]
        fcols = [j for j, h in enumerate(header) if h.startswith("f")]
        if not fcols:
            raise ValueError("candidate CSV has no loss columns f1..fN")
        cands = [
            Candidate(
                np.array([float(r[j]) for j in xcols]),
                np.array([float(r[j]) for j in fcols]),
                int(r[0]),
            )
            for r in rows[1:]
        ]
        return cls(cands, len(fcols))

    def to_json(self) -> str:
        return json.dumps(
            {
                "objective_count": self.objective_count,
                "candidates": [
                    {"run_id": c.run_id, "x": np.asarray(c.x).tolist(), "losses": np.asarray(c.losses).tolist()}
                    for c in self.candidates
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CandidateSet":
        obj = json.loads(text)
        cands = [Candidate(np.asarray(c["x"], float), np.asarray(c["losses"], float), int(c["run_id"])) for c in obj["candidates"]]
        return cls(cands, int(obj["objective_count"]))


@dataclass(frozen=True)
class MultiObjectiveProblem:
    """Box-bounded problem with a vectorized loss map.

    Args:
        losses: maps ``(n, dim)`` points to ``(n, n_objectives)`` losses.
        n_objectives: number of objectives, at least 2.
        lower, upper: box bounds, finite.
        prior: optional ``(rng, n) -> (n, dim)`` sampler; uniform on the box by default.
        classify: optional hidden-label map used only for evaluation.
        step_size: initial Gaussian step of local optimizers, relative to the box width.
    """

    losses: Callable[[np.ndarray], np.ndarray]
    n_objectives: int
    lower: np.ndarray
    upper: np.ndarray
    prior: Callable[[np.random.Generator, int], np.ndarray] | None = None
    classify: Callable[[np.ndarray], np.ndarray] | None = None
    step_size: float = 0.1

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo) or not np.all(np.isfinite(lo + hi)):
            raise ValueError("bounds must be finite with lower < upper")
        if self.n_objectives < 2:
            raise ValueError("a multi-objective problem needs at least 2 objectives")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def sample_prior(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.prior is not None:
            return np.asarray(self.prior(rng, n), dtype=float).reshape(n, self.dim)
        return self.lower + (self.upper - self.lower) * rng.random((n, self.dim))

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        L = np.asarray(self.losses(np.atleast_2d(X)), dtype=float)
        if L.shape != (len(np.atleast_2d(X)), self.n_objectives):
            raise ValueError(f"loss map returned shape {L.shape}")
        return L


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and differs somewhere (minimization)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"loss vectors differ in length: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def pareto_mask(L: np.ndarray) -> np.ndarray:
    """Boolean mask of non-dominated rows of ``L``; duplicates are all kept."""
    L = np.asarray(L, dtype=float)
    le = np.all(L[:, None, :] <= L[None, :, :], axis=2)
    lt = np.any(L[:, None, :] < L[None, :, :], axis=2)
    dominated_by = le & lt  # [i, j]: row i dominates row j
    return ~dominated_by.any(axis=0)


def pareto_front(cset: CandidateSet) -> CandidateSet:
    """Non-dominated candidates, ordered by ``run_id`` (stable)."""
    if len(cset) == 0:
        raise ValueError("empty candidate set")
    idx = np.flatnonzero(pareto_mask(cset.L))
    idx = sorted(idx, key=lambda i: cset[i].run_id)
    return cset.subset(idx)


def sample_simplex_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform point on the probability simplex via normalized exponentials."""
    e = rng.exponential(size=n)
    return e / e.sum()


def minimize_batch(
    fn: Callable[[np.ndarray], np.ndarray],
    sample_prior: Callable[[np.random.Generator, int], np.ndarray],
    lower: np.ndarray,
    upper: np.ndarray,
    optimizer: str,
    budget: int,
    rng: np.random.Generator,
    n_runs: int = 1,
    sigma0: float = 0.1,
    archive: list | None = None,
):
    """Run ``n_runs`` independent scalar minimizations side by side.

    ``fn`` maps ``(n, dim)`` to ``(n,)``. Each run spends exactly ``budget``
    evaluations; the first is a prior draw.

    * ``random-search`` draws every point from the prior and keeps the best.
    * ``discrete-1+1`` resamples each coordinate from the prior with
      probability ``1/dim`` (at least one) and keeps the child if not worse.
    * ``gaussian-es`` is a (1+1)-ES with a one-fifth-style step rule; it
      uses the prior only for the starting point. ``sigma0`` is relative to
      the box width.

    If ``archive`` is a list, every evaluated ``(X, values)`` pair is
    appended to it.

    Returns:
        ``(X_best, f_best)`` with shapes ``(n_runs, dim)`` and ``(n_runs,)``.
    """
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {optimizer!r}; expected one of {OPTIMIZERS}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    dim = lower.size

    def evaluate(X):
        v = np.asarray(fn(X), dtype=float).reshape(len(X))
        if archive is not None:
            archive.append((X.copy(), v.copy()))
        return v

    x = np.asarray(sample_prior(rng, n_runs), dtype=float).reshape(n_runs, dim)
    fx = evaluate(x)
    sigma = np.full(n_runs, sigma0)
    width = upper - lower
    for _ in range(budget - 1):
        if optimizer == "random-search":
            y = np.asarray(sample_prior(rng, n_runs), dtype=float).reshape(n_runs, dim)
        elif optimizer == "discrete-1+1":
            mask = rng.random((n_runs, dim)) < 1.0 / dim
            forced = rng.integers(dim, size=n_runs)
            mask[np.arange(n_runs), forced] = True
            fresh = np.asarray(sample_prior(rng, n_runs), dtype=float).reshape(n_runs, dim)
            y = np.where(mask, fresh, x)
        else:
            y = x + (sigma[:, None] * width) * rng.standard_normal((n_runs, dim))
            y = np.clip(y, lower, upper)
        fy = evaluate(y)
        better = fy <= fx
        x = np.where(better[:, None], y, x)
        fx = np.where(better, fy, fx)
        if optimizer == "gaussian-es":
            sigma = np.where(better, sigma * 1.5, sigma * 1.5**-0.25)
    return x, fx


def _check_weights(w, n_objectives: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n_objectives,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must be a point of the {n_objectives}-simplex, got {w.tolist()}")
    return w


def optimize_scalar(
    problem: MultiObjectiveProblem,
    weights: Sequence[float],
    optimizer: str,
    budget: int,
    rng: np.random.Generator,
    run_id: int = 0,
    archive: list | None = None,
) -> Candidate:
    """Best point found for the weighted loss ``w . F(x)`` within ``budget`` evaluations."""
    w = _check_weights(weights, problem.n_objectives)
    x, _ = minimize_batch(
        lambda X: problem.evaluate(X) @ w,
        problem.sample_prior,
        problem.lower,
        problem.upper,
        optimizer,
        budget,
        rng,
        sigma0=problem.step_size,
        archive=archive,
    )
    return Candidate(x[0], problem.evaluate(x)[0], run_id)


def run_stream(base_seed: int, run_id: int) -> np.random.Generator:
    """Independent stream for one run, derived from a base seed and the run id."""
    return np.random.default_rng(np.random.SeedSequence([base_seed, run_id]))


def msr_generate(
    problem: MultiObjectiveProblem,
    k: int,
    optimizer: str,
    budget: int,
    rng: np.random.Generator,
    weights: Sequence[float] | None = None,
    pool: list | None = None,
) -> CandidateSet:
    """Multiple single runs: ``k`` scalarized optimizations with random simplex weights.

    Each run draws its own weights (unless ``weights`` fixes them for all
    runs) from a stream derived from one base seed taken from ``rng`` and
    the run id, so results do not depend on run order. If ``pool`` is a
    list, every evaluated point is appended to it as a :class:`Candidate`.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    base = int(rng.integers(2**63))
    winners = []
    for run_id in range(k):
        r = run_stream(base, run_id)
        w = sample_simplex_weights(r, problem.n_objectives) if weights is None else weights
        arch = [] if pool is not None else None
        try:
            winners.append(optimize_scalar(problem, w, optimizer, budget, r, run_id, archive=arch))
        except Exception as exc:
            raise RuntimeError(f"MSR run {run_id} failed: {exc}") from exc
        if pool is not None:
            X = np.concatenate([a[0] for a in arch])
            pool.extend(Candidate(x, l, run_id) for x, l in zip(X, problem.evaluate(X)))
    labels = None
    if problem.classify is not None:
        labels = list(problem.classify(np.array([c.x for c in winners])))
    return CandidateSet(winners, problem.n_objectives, labels)
