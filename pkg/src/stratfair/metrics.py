"""Class frequencies and the diversity-loss metric.

The diversity loss of an observed frequency vector ``f'`` against a target
``f`` is ``1 - min_{i: f_i > 0} f'_i / f_i``. It is 0 when no class with
positive target mass is under-represented and 1 when one of them has
vanished.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class FrequencyVector:
    """Class frequencies on the probability simplex.

    Args:
        class_ids: Unique class labels.
        values: One frequency per class, non-negative, summing to 1.
    """

    class_ids: tuple
    values: np.ndarray

    def __init__(self, class_ids: Sequence[Hashable], values: Sequence[float]):
        ids = tuple(class_ids)
        vals = np.asarray(values, dtype=float).copy()
        if vals.ndim != 1 or len(ids) != vals.shape[0]:
            raise ValueError(
                f"class_ids and values must have equal length, got {len(ids)} and {vals.shape}"
            )
        if len(set(ids)) != len(ids):
            raise ValueError(f"class_ids must be unique, got {ids}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("frequencies must be finite")
        if np.any(vals < 0):
            raise ValueError(f"frequencies must be non-negative, got {vals.tolist()}")
        if abs(vals.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(
                f"frequencies must sum to 1 within {SIMPLEX_TOL}, got {vals.sum()!r}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "class_ids", ids)
        object.__setattr__(self, "values", vals)

    @classmethod
    def normalized(cls, class_ids: Sequence[Hashable], weights: Sequence[float]) -> "FrequencyVector":
        """Build a vector from non-negative weights by explicit renormalization."""
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be non-negative with a positive sum")
        return cls(class_ids, w / w.sum())

    def __len__(self) -> int:
        return len(self.class_ids)

    def __getitem__(self, class_id: Hashable) -> float:
        return float(self.values[self.class_ids.index(class_id)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrequencyVector):
            return NotImplemented
        return self.class_ids == other.class_ids and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.class_ids, self.values.tobytes()))

    def as_dict(self) -> dict:
        return {c: float(v) for c, v in zip(self.class_ids, self.values)}

    def to_json(self) -> str:
        return json.dumps({"classes": list(self.class_ids), "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "FrequencyVector":
        obj = json.loads(text)
        try:
            return cls(obj["classes"], obj["values"])
        except KeyError as exc:
            raise ValueError(f"frequency JSON is missing key {exc}") from None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class", "frequency"])
        for c, v in zip(self.class_ids, self.values):
            writer.writerow([c, repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FrequencyVector":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if rows and rows[0][:2] == ["class", "frequency"]:
            rows = rows[1:]
        if any(len(r) != 2 for r in rows):
            raise ValueError("frequency CSV must have exactly two columns: class,frequency")
        return cls([r[0] for r in rows], [float(r[1]) for r in rows])


@dataclass(frozen=True)
class DiversityLoss:
    """Result of :func:`diversity_loss`.

    ``per_class_ratio`` maps every class with positive target frequency to
    ``observed / target``; classes with zero target mass are listed in
    ``zero_target_classes`` instead.
    """

    delta: float
    worst_class: Hashable
    per_class_ratio: dict = field(default_factory=dict)
    zero_target_classes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "worst_class": self.worst_class,
            "per_class_ratio": dict(self.per_class_ratio),
            "zero_target_classes": list(self.zero_target_classes),
        }


def class_frequencies(labeled_samples: Iterable[Hashable], class_ids: Sequence[Hashable]) -> FrequencyVector:
    """Empirical class frequencies ``count_i / N`` over a fixed label set.

    Raises:
        ValueError: on an empty sample or a label outside ``class_ids``.
    """
    labels = list(labeled_samples)
    if not labels:
        raise ValueError("no samples")
    ids = tuple(class_ids)
    counts = Counter(labels)
    unknown = [lab for lab in counts if lab not in set(ids)]
    if unknown:
        raise ValueError(f"unknown class label {unknown[0]!r}; expected one of {ids}")
    n = len(labels)
    return FrequencyVector(ids, [counts.get(c, 0) / n for c in ids])


def diversity_loss(target: FrequencyVector, observed: FrequencyVector) -> DiversityLoss:
    """Diversity loss of ``observed`` with respect to ``target``.

    Classes with zero target frequency are excluded from the infimum. Ties
    on the worst ratio resolve to the first class in ``class_ids`` order.
    """
    if target.class_ids != observed.class_ids:
        raise ValueError(
            f"class sets differ: target {target.class_ids} vs observed {observed.class_ids}"
        )
    support = target.values > 0
    if not support.any():
        raise ValueError("target has no positive entry")
    ratios = {}
    worst, worst_ratio = None, np.inf
    for c, f, g in zip(target.class_ids, target.values, observed.values):
        if f <= 0:
            continue
        try:
            r = float(g) / float(f)
        except OverflowError:
            r = np.inf
        ratios[c] = r
        if r < worst_ratio:
            worst, worst_ratio = c, r
    # sum(g over support) <= 1 = sum(f over support) forces the min ratio below 1
    assert worst_ratio <= 1.0 + 1e-9, f"min ratio {worst_ratio} exceeds 1"
    delta = min(max(1.0 - worst_ratio, 0.0), 1.0)
    zero = tuple(c for c, f in zip(target.class_ids, target.values) if f <= 0)
    return DiversityLoss(delta, worst, ratios, zero)


def remaining_dl_percent(dl_before: float, dl_after: float) -> float:
    """Percentage of diversity loss left after a repair; above 100 means it got worse."""
    if dl_before == 0:
        raise ValueError("no loss to repair")
    if dl_before < 0:
        raise ValueError(f"dl_before must be positive, got {dl_before}")
    return 100.0 * dl_after / dl_before
