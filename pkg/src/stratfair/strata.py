"""Strata built from auxiliary features.

A :class:`Discretizer` cuts each of ``d`` selected features into ``M``
equally frequent bins; the Cartesian product of bins gives ``M**d`` strata,
indexed little-endian (``index = sum_j bin_j * M**j``). Values equal to a
threshold fall in the lower bin.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

SELECTION_STRATEGIES = ("explicit", "first-d", "max-abs-correlation", "random")


@dataclass(frozen=True)
class FeatureMatrix:
    """Rectangular table of named real-valued features.

    ``labels`` holds an optional class column read from CSV; it is carried
    for evaluation and never consulted by discretization or rejection.
    """

    names: tuple
    values: np.ndarray
    sample_ids: tuple | None = None
    labels: tuple | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError(f"feature values must be 2-D, got shape {vals.shape}")
        n, f = vals.shape
        if n < 1 or f < 1:
            raise ValueError(f"feature matrix needs N >= 1 and F >= 1, got {vals.shape}")
        if len(self.names) != f:
            raise ValueError(f"{len(self.names)} names for {f} columns")
        if len(set(self.names)) != f:
            raise ValueError("feature names must be unique")
        if not np.all(np.isfinite(vals)):
            raise ValueError("feature matrix contains missing or non-finite values")
        for attr in ("sample_ids", "labels"):
            col = getattr(self, attr)
            if col is not None and len(col) != n:
                raise ValueError(f"{attr} has {len(col)} entries for {n} rows")
        vals.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", vals)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def columns(self, names: Sequence[str]) -> np.ndarray:
        missing = [c for c in names if c not in self.names]
        if missing:
            raise KeyError(f"missing feature {missing[0]!r}")
        idx = [self.names.index(c) for c in names]
        return self.values[:, idx]


def read_feature_csv(source, label_column: str | None = None) -> FeatureMatrix:
    """Parse a headered CSV: first column sample id, optional label column, rest features.

    ``source`` is a path or a file-like object.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise ValueError("feature CSV needs a header and at least one row")
    header, body = rows[0], rows[1:]
    if label_column is not None and label_column not in header[1:]:
        raise ValueError(f"label column {label_column!r} not in header")
    lab_idx = header.index(label_column) if label_column is not None else None
    feat_idx = [j for j in range(1, len(header)) if j != lab_idx]
    values = np.empty((len(body), len(feat_idx)))
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise ValueError(f"row {i + 1} has {len(r)} fields, header has {len(header)}")
        try:
            values[i] = [float(r[j]) for j in feat_idx]
        except ValueError:
            raise ValueError(f"row {i + 1}: non-numeric feature value") from None
    return FeatureMatrix(
        names=tuple(header[j] for j in feat_idx),
        values=values,
        sample_ids=tuple(r[0] for r in body),
        labels=tuple(r[lab_idx] for r in body) if lab_idx is not None else None,
    )


def write_feature_csv(fm: FeatureMatrix, label_column: str | None = None) -> str:
    """Inverse of :func:`read_feature_csv`; floats are written with ``repr``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["id"] + ([label_column] if label_column else []) + list(fm.names)
    w.writerow(header)
    ids = fm.sample_ids if fm.sample_ids is not None else range(fm.n_samples)
    for i, (sid, row) in enumerate(zip(ids, fm.values)):
        lab = [fm.labels[i]] if label_column else []
        w.writerow([sid] + lab + [repr(float(v)) for v in row])
    return buf.getvalue()


def select_features(
    features: FeatureMatrix,
    d: int,
    strategy: str = "explicit",
    *,
    names: Sequence[str] | None = None,
    score: np.ndarray | str | None = None,
    seed: int | None = None,
) -> list[str]:
    """Choose ``d`` auxiliary features.

    Strategies: ``explicit`` (``names`` passthrough), ``first-d``,
    ``max-abs-correlation`` against ``score`` (an array or the name of a
    column, which is then excluded from the candidates), and ``random``
    (needs ``seed``). Correlation ties keep column order.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if strategy not in SELECTION_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {SELECTION_STRATEGIES}")
    if strategy == "explicit":
        if names is None:
            raise ValueError("explicit strategy requires names")
        names = list(names)
        unknown = [c for c in names if c not in features.names]
        if unknown:
            raise ValueError(f"unknown feature {unknown[0]!r}")
        if len(names) != d or len(set(names)) != d:
            raise ValueError(f"explicit list must hold {d} distinct names, got {names}")
        return names

    pool = list(features.names)
    if strategy == "max-abs-correlation":
        if score is None:
            raise ValueError("max-abs-correlation requires a score")
        if isinstance(score, str):
            target = features.column(score)
            pool.remove(score)
        else:
            target = np.asarray(score, dtype=float)
            if target.shape != (features.n_samples,):
                raise ValueError("score must have one value per sample")
    if d > len(pool):
        raise ValueError(f"d={d} exceeds the {len(pool)} available features")

    if strategy == "first-d":
        return pool[:d]
    if strategy == "random":
        if seed is None:
            raise ValueError("random strategy requires a seed")
        rng = np.random.default_rng(seed)
        return [pool[i] for i in sorted(rng.choice(len(pool), size=d, replace=False))]

    X = features.columns(pool)
    xc = X - X.mean(axis=0)
    tc = target - target.mean()
    denom = np.sqrt((xc**2).sum(axis=0) * (tc**2).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, np.abs(xc.T @ tc) / denom, 0.0)
    order = sorted(range(len(pool)), key=lambda j: (-corr[j], j))
    return [pool[j] for j in order[:d]]


@dataclass(frozen=True)
class Discretizer:
    """Per-feature cut points; ``thresholds[j]`` has ``arity - 1`` ascending values."""

    selected_features: tuple
    thresholds: tuple
    arity: int

    def __post_init__(self):
        if len(self.selected_features) < 1:
            raise ValueError("need at least one selected feature")
        if self.arity < 2:
            raise ValueError(f"arity must be >= 2, got {self.arity}")
        if len(self.thresholds) != len(self.selected_features):
            raise ValueError("one threshold list per selected feature is required")
        ths = []
        for name, t in zip(self.selected_features, self.thresholds):
            t = tuple(float(v) for v in t)
            if len(t) != self.arity - 1:
                raise ValueError(f"feature {name!r}: expected {self.arity - 1} thresholds, got {len(t)}")
            if any(b <= a for a, b in zip(t, t[1:])):
                raise ValueError(f"feature {name!r}: thresholds must be strictly ascending")
            ths.append(t)
        object.__setattr__(self, "selected_features", tuple(self.selected_features))
        object.__setattr__(self, "thresholds", tuple(ths))

    @property
    def d(self) -> int:
        return len(self.selected_features)

    @property
    def n_strata(self) -> int:
        return self.arity**self.d

    def bins(self, X: np.ndarray) -> np.ndarray:
        """Bin indices, shape ``(n, d)``, for rows ordered like ``selected_features``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape, dtype=np.int64)
        for j, t in enumerate(self.thresholds):
            out[:, j] = np.searchsorted(np.asarray(t), X[:, j], side="left")
        return out

    def assign_array(self, X: np.ndarray) -> np.ndarray:
        """Stratum index for each row of ``X`` (columns in ``selected_features`` order)."""
        b = self.bins(X)
        radix = self.arity ** np.arange(self.d, dtype=np.int64)
        return b @ radix

    def assign_matrix(self, features: FeatureMatrix) -> np.ndarray:
        try:
            X = features.columns(self.selected_features)
        except KeyError as exc:
            raise ValueError(f"feature matrix lacks selected feature: {exc}") from None
        return self.assign_array(X)

    def to_json(self) -> str:
        return json.dumps(
            {
                "features": list(self.selected_features),
                "thresholds": [list(t) for t in self.thresholds],
                "arity": self.arity,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Discretizer":
        obj = json.loads(text)
        return cls(tuple(obj["features"]), tuple(tuple(t) for t in obj["thresholds"]), int(obj["arity"]))


def assign_stratum(disc: Discretizer, feature_row: Mapping[str, float] | Sequence[float]) -> int:
    """Stratum index of a single row.

    ``feature_row`` is either a mapping from feature name to value or a
    sequence ordered like ``disc.selected_features``.
    """
    if isinstance(feature_row, Mapping):
        missing = [c for c in disc.selected_features if c not in feature_row]
        if missing:
            raise ValueError(f"missing feature {missing[0]!r}")
        row = [feature_row[c] for c in disc.selected_features]
    else:
        row = list(feature_row)
        if len(row) != disc.d:
            raise ValueError(f"row has {len(row)} values, discretizer expects {disc.d}")
    return int(disc.assign_array(np.asarray(row, dtype=float)[None, :])[0])


def fit_quantile_bins(features: FeatureMatrix, selected: Sequence[str], M: int) -> Discretizer:
    """Fit ``M`` equally frequent bins per selected feature.

    Threshold ``k`` is the empirical (inverse-CDF) quantile at ``k/M``: the
    ``ceil(k N / M)``-th smallest value. With the lower-bin boundary rule the
    fitting data lands ``floor`` or ``ceil`` of ``N/M`` samples per bin when
    values are distinct.

    Raises:
        ValueError: if a feature cannot be split into ``M`` non-empty bins.
    """
    if M < 2:
        raise ValueError(f"arity M must be >= 2, got {M}")
    selected = list(selected)
    n = features.n_samples
    if n < M:
        raise ValueError(f"need at least M={M} samples, got {n}")
    thresholds = []
    for name in selected:
        col = np.sort(features.column(name))
        if np.unique(col).size < M:
            raise ValueError(f"degenerate feature {name!r}: fewer than {M} distinct values")
        # integer ceil avoids float drift in k*N/M
        ranks = [-(-k * n // M) for k in range(1, M)]
        t = [float(col[r - 1]) for r in ranks]
        if any(b <= a for a, b in zip(t, t[1:])) or t[-1] >= col[-1]:
            raise ValueError(
                f"degenerate feature {name!r}: ties prevent {M} non-empty equally frequent bins"
            )
        thresholds.append(tuple(t))
    return Discretizer(tuple(selected), tuple(thresholds), M)


@dataclass(frozen=True)
class StratumDistribution:
    """Smoothed stratum probabilities for a reference population or a model."""

    probs: np.ndarray
    source: str = "reference"
    sample_count: int = 0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).copy()
        if p.ndim != 1 or p.size < 1:
            raise ValueError("probs must be a non-empty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probs must lie on the simplex")
        if self.source not in ("reference", "model"):
            raise ValueError(f"source must be 'reference' or 'model', got {self.source!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return self.probs.size

    def to_dict(self) -> dict:
        return {"probs": self.probs.tolist(), "source": self.source, "sample_count": self.sample_count}

    @classmethod
    def from_dict(cls, obj: dict) -> "StratumDistribution":
        return cls(np.asarray(obj["probs"], dtype=float), obj.get("source", "reference"), int(obj.get("sample_count", 0)))


def estimate_stratum_probs(
    assignments: Sequence[int],
    stratum_count: int,
    smoothing: float = 1.0,
    source: str = "reference",
) -> StratumDistribution:
    """Additively smoothed stratum frequencies ``(count_i + a) / (N + a * m)``."""
    if stratum_count < 1:
        raise ValueError("stratum_count must be >= 1")
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    a = np.asarray(assignments, dtype=np.int64)
    if a.size and (a.min() < 0 or a.max() >= stratum_count):
        raise ValueError(f"stratum index outside [0, {stratum_count})")
    counts = np.bincount(a, minlength=stratum_count).astype(float)
    if smoothing == 0 and np.any(counts == 0):
        raise ValueError("empty stratum; rejection reweighting needs every stratum to have positive probability (use smoothing > 0)")
    probs = (counts + smoothing) / (a.size + smoothing * stratum_count)
    return StratumDistribution(probs, source, int(a.size))
