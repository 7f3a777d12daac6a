"""Stratified rejection: make any sampler hit each stratum with target probability.

Given target stratum probabilities ``p`` and the sampler's own ``p'``, a
draw landing in stratum ``i`` is kept with probability
``(p_i / p'_i) / max_j (p_j / p'_j)``. Accepted draws then fall in stratum
``i`` with probability ``p_i``, at a mean cost of ``max_j p_j / p'_j``
draws per accepted sample.

Rejection only ever reads the stratum index of a draw. Class labels ride
along inside :class:`SampleBatch` behind :meth:`SampleBatch.reveal_labels`,
which this module never calls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .strata import Discretizer, StratumDistribution

DEFAULT_MAX_TRIALS = 10_000


class MaxTrialsExceeded(RuntimeError):
    """Raised when a sample needed more than ``max_trials`` draws."""

    def __init__(self, trials: int):
        super().__init__(
            f"no sample accepted after {trials} trials; target and model stratum "
            "probabilities are badly mismatched or miscalibrated"
        )
        self.trials = trials


class SampleBatch:
    """Draws from a generator: feature rows, optional payload arrays, hidden labels.

    Labels are for evaluation only. Sampling code must not read them; the
    accessor is a single method so tests can instrument it.
    """

    def __init__(self, features, feature_names, payload=None, labels=None):
        self.features = np.asarray(features, dtype=float)
        if self.features.ndim != 2:
            raise ValueError("features must be 2-D")
        self.feature_names = tuple(feature_names)
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError("one name per feature column is required")
        self.payload = {k: np.asarray(v) for k, v in (payload or {}).items()}
        self._labels = None if labels is None else np.asarray(labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    def columns(self, names: Sequence[str]) -> np.ndarray:
        missing = [c for c in names if c not in self.feature_names]
        if missing:
            raise ValueError(f"sample lacks feature {missing[0]!r}")
        return self.features[:, [self.feature_names.index(c) for c in names]]

    def reveal_labels(self) -> np.ndarray:
        """Hidden class labels. Evaluation only."""
        if self._labels is None:
            raise ValueError("this batch carries no labels")
        return self._labels

    def take(self, idx) -> "SampleBatch":
        idx = np.asarray(idx)
        return type(self)(
            self.features[idx],
            self.feature_names,
            {k: v[idx] for k, v in self.payload.items()},
            None if self._labels is None else self._labels[idx],
        )

    @classmethod
    def concat(cls, batches: Sequence["SampleBatch"], feature_names=None) -> "SampleBatch":
        if not batches:
            return cls(np.empty((0, len(feature_names or ()))), feature_names or ())
        first = batches[0]
        labels = None
        if all(b._labels is not None for b in batches):
            labels = np.concatenate([b._labels for b in batches])
        return cls(
            np.concatenate([b.features for b in batches]),
            first.feature_names,
            {k: np.concatenate([b.payload[k] for b in batches]) for k in first.payload},
            labels,
        )


class GeneratorHandle(Protocol):
    """Anything that produces independent draws from a seeded stream."""

    feature_names: tuple

    def draw(self, rng: np.random.Generator, n: int) -> SampleBatch: ...


@dataclass(frozen=True)
class ReweightPlan:
    """Per-stratum acceptance probabilities for rejection reweighting."""

    target: StratumDistribution
    model: StratumDistribution
    accept: np.ndarray
    max_ratio: float

    @property
    def expected_acceptance(self) -> float:
        return float(self.model.probs @ self.accept)

    def to_dict(self) -> dict:
        return {
            "target": self.target.probs.tolist(),
            "model": self.model.probs.tolist(),
            "accept": self.accept.tolist(),
            "max_ratio": self.max_ratio,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ReweightPlan":
        obj = json.loads(text)
        plan = build_plan(
            StratumDistribution(np.asarray(obj["target"]), "reference"),
            StratumDistribution(np.asarray(obj["model"]), "model"),
        )
        if "accept" in obj and not np.allclose(plan.accept, obj["accept"], rtol=0, atol=1e-12):
            raise ValueError("stored acceptance vector disagrees with target/model probabilities")
        return plan


def build_plan(target: StratumDistribution, model: StratumDistribution) -> ReweightPlan:
    """Acceptance probabilities ``(p_i/p'_i) / max_j(p_j/p'_j)``.

    Strata with zero target probability get acceptance 0.
    """
    p, q = target.probs, model.probs
    if p.shape != q.shape:
        raise ValueError(f"stratum count mismatch: target {p.size}, model {q.size}")
    if np.any(q <= 0):
        bad = int(np.flatnonzero(q <= 0)[0])
        raise ValueError(
            f"model probability of stratum {bad} is 0; every stratum must be "
            "reachable by the generator (smooth the estimate)"
        )
    ratio = p / q
    max_ratio = float(ratio.max())
    accept = ratio / max_ratio
    accept[p == 0] = 0.0
    accept.setflags(write=False)
    return ReweightPlan(target, model, accept, max_ratio)


def _strata_of(batch: SampleBatch, disc: Discretizer) -> np.ndarray:
    return disc.assign_array(batch.columns(disc.selected_features))


def sample_one(
    gen: GeneratorHandle,
    disc: Discretizer,
    plan: ReweightPlan,
    rng: np.random.Generator,
    max_trials: int = DEFAULT_MAX_TRIALS,
) -> tuple[SampleBatch, int]:
    """Draw until one sample is accepted.

    Returns:
        The accepted draw as a one-row batch and the number of draws used.

    Raises:
        MaxTrialsExceeded: if ``max_trials`` draws were all rejected.
    """
    if max_trials < 1:
        raise ValueError("max_trials must be >= 1")
    if disc.n_strata != len(plan.accept):
        raise ValueError(f"discretizer has {disc.n_strata} strata, plan has {len(plan.accept)}")
    for trial in range(1, max_trials + 1):
        x = gen.draw(rng, 1)
        i = _strata_of(x, disc)[0]
        if rng.random() < plan.accept[i]:
            return x, trial
    raise MaxTrialsExceeded(max_trials)


def sample_batch(
    gen: GeneratorHandle,
    disc: Discretizer,
    plan: ReweightPlan,
    rng: np.random.Generator,
    n: int,
    max_trials: int = DEFAULT_MAX_TRIALS,
    chunk_size: int | None = None,
) -> tuple[SampleBatch, int]:
    """Vectorized rejection: ``n`` accepted draws and the draws they consumed.

    Draws are requested from ``gen`` in chunks; draws after the ``n``-th
    acceptance in the last chunk are discarded and not counted as trials.
    The ``max_trials`` limit applies to every run of consecutive
    rejections, exactly as in :func:`sample_one`.
    """
    if max_trials < 1:
        raise ValueError("max_trials must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    if disc.n_strata != len(plan.accept):
        raise ValueError(f"discretizer has {disc.n_strata} strata, plan has {len(plan.accept)}")
    parts: list[SampleBatch] = []
    total = 0
    pending = 0  # draws since the last acceptance
    need = n
    while need > 0:
        size = chunk_size or int(min(max(np.ceil(need * plan.max_ratio * 1.05) + 16, 64), 1 << 20))
        batch = gen.draw(rng, size)
        acc = rng.random(size) < plan.accept[_strata_of(batch, disc)]
        pos = np.flatnonzero(acc)
        if pos.size:
            gaps = np.diff(pos, prepend=-1)
            gaps[0] += pending
            over = np.flatnonzero(gaps[:need] > max_trials)
            if over.size:
                raise MaxTrialsExceeded(max_trials)
        if pos.size >= need:
            keep = pos[:need]
            total += int(keep[-1]) + 1
            parts.append(batch.take(keep))
            need = 0
        else:
            if pos.size:
                parts.append(batch.take(pos))
                pending = size - int(pos[-1]) - 1
            else:
                pending += size
            if pending > max_trials:
                raise MaxTrialsExceeded(max_trials)
            total += size
            need -= pos.size
    if not parts:
        return SampleBatch(np.empty((0, len(gen.feature_names))), gen.feature_names), 0
    return SampleBatch.concat(parts), total
