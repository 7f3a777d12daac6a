"""Synthetic ground truth and degraded samplers.

A sample is decoded from a latent vector ``z = (u, e_1..e_F, eta)``:

* the class is the inverse CDF of the (possibly collapsed) class
  frequencies at ``u``;
* feature ``j`` is ``rho_j * mean[class, j] + spread * e_j``, so ``rho_j = 0``
  makes it independent of the class;
* quality is ``quality_slope * target_freq[class] + quality_noise * eta``:
  frequent classes look better, which is what makes quality optimization
  erode rare classes.

Optimizing the latent for quality (best-of-B, discrete (1+1), Gaussian
(1+1)-ES) gives the degraded models used in the experiments.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .metrics import FrequencyVector
from .moo import OPTIMIZERS, minimize_batch
from .rejection import SampleBatch

LATENT_CLIP = 5.0
CLASS_FEATURE = "class_code"


@dataclass(frozen=True)
class PopulationSpec:
    """Ground-truth population: classes, frequencies, features and quality.

    ``rho`` is broadcast to one value per feature. ``class_means`` defaults
    to ``separation`` times standard normals drawn from ``layout_seed``.
    """

    frequencies: FrequencyVector
    n_features: int = 4
    rho: tuple = (0.0,)
    separation: float = 1.0
    spread: float = 1.0
    quality_slope: float = 4.0
    quality_noise: float = 1.0
    layout_seed: int = 0
    class_means: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        rho = np.broadcast_to(np.asarray(self.rho, dtype=float), (self.n_features,)).copy()
        if np.any(rho < 0) or np.any(rho > 1):
            raise ValueError("rho must lie in [0, 1]")
        object.__setattr__(self, "rho", tuple(rho.tolist()))
        K = len(self.frequencies)
        if self.class_means is None:
            means = self.separation * np.random.default_rng(self.layout_seed).standard_normal((K, self.n_features))
        else:
            means = np.asarray(self.class_means, dtype=float)
            if means.shape != (K, self.n_features):
                raise ValueError(f"class_means must have shape {(K, self.n_features)}")
        means.setflags(write=False)
        object.__setattr__(self, "class_means", means)
        if self.spread <= 0 or self.quality_noise < 0:
            raise ValueError("spread must be positive and quality_noise non-negative")

    @property
    def class_ids(self) -> tuple:
        return self.frequencies.class_ids

    @property
    def feature_names(self) -> tuple:
        return tuple(f"e{j}" for j in range(self.n_features))

    def with_rho(self, rho) -> "PopulationSpec":
        return PopulationSpec(
            self.frequencies, self.n_features, tuple(np.broadcast_to(rho, (self.n_features,))),
            self.separation, self.spread, self.quality_slope, self.quality_noise,
            self.layout_seed, self.class_means,
        )

    @classmethod
    def from_dict(cls, obj: dict) -> "PopulationSpec":
        freqs = FrequencyVector(obj["classes"], obj["frequencies"])
        n_features = int(obj.get("n_features", 4))
        rho = obj.get("rho", 0.0)
        return cls(
            freqs,
            n_features,
            tuple(np.broadcast_to(np.asarray(rho, dtype=float), (n_features,))),
            float(obj.get("separation", 1.0)),
            float(obj.get("spread", 1.0)),
            float(obj.get("quality_slope", 4.0)),
            float(obj.get("quality_noise", 1.0)),
            int(obj.get("layout_seed", 0)),
            None if obj.get("class_means") is None else np.asarray(obj["class_means"], dtype=float),
        )

    def to_dict(self) -> dict:
        return {
            "classes": list(self.class_ids),
            "frequencies": self.frequencies.values.tolist(),
            "n_features": self.n_features,
            "rho": list(self.rho),
            "separation": self.separation,
            "spread": self.spread,
            "quality_slope": self.quality_slope,
            "quality_noise": self.quality_noise,
            "layout_seed": self.layout_seed,
            "class_means": self.class_means.tolist(),
        }


@dataclass(frozen=True)
class CollapsedModelSpec:
    """Model whose class probabilities are proportional to ``f_i ** (1 + gamma)``."""

    base: PopulationSpec
    gamma: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")


def load_spec(path) -> PopulationSpec | CollapsedModelSpec:
    """Read a population spec from JSON; a ``gamma`` key yields a collapsed model."""
    with open(path) as fh:
        obj = json.load(fh)
    base = PopulationSpec.from_dict(obj)
    return CollapsedModelSpec(base, float(obj["gamma"])) if "gamma" in obj else base


def _base(spec) -> PopulationSpec:
    return spec.base if isinstance(spec, CollapsedModelSpec) else spec


def model_frequencies(spec: PopulationSpec | CollapsedModelSpec) -> FrequencyVector:
    """Class frequencies the sampler actually uses."""
    base = _base(spec)
    f = base.frequencies
    gamma = spec.gamma if isinstance(spec, CollapsedModelSpec) else 0.0
    if gamma == 0:
        return f
    return FrequencyVector.normalized(f.class_ids, f.values ** (1.0 + gamma))


def latent_bounds(spec) -> tuple[np.ndarray, np.ndarray]:
    F = _base(spec).n_features
    lo = np.concatenate([[0.0], np.full(F + 1, -LATENT_CLIP)])
    hi = np.concatenate([[1.0], np.full(F + 1, LATENT_CLIP)])
    return lo, hi


def sample_latent(spec, rng: np.random.Generator, n: int) -> np.ndarray:
    F = _base(spec).n_features
    z = np.empty((n, F + 2))
    z[:, 0] = rng.random(n)
    z[:, 1:] = np.clip(rng.standard_normal((n, F + 1)), -LATENT_CLIP, LATENT_CLIP)
    return z


def _class_index(spec, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(model_frequencies(spec).values)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


def quality_of(spec, z: np.ndarray) -> np.ndarray:
    base = _base(spec)
    k = _class_index(spec, z[:, 0])
    return base.quality_slope * base.frequencies.values[k] + base.quality_noise * z[:, -1]


def decode(spec, z: np.ndarray, expose_class: bool = False) -> SampleBatch:
    """Turn latent rows into samples; ``expose_class`` appends a class-code feature (testing only)."""
    base = _base(spec)
    z = np.atleast_2d(z)
    k = _class_index(spec, z[:, 0])
    rho = np.asarray(base.rho)
    feats = rho * base.class_means[k] + base.spread * z[:, 1 : 1 + base.n_features]
    names = base.feature_names
    if expose_class:
        feats = np.column_stack([feats, k.astype(float)])
        names = names + (CLASS_FEATURE,)
    labels = np.asarray(base.class_ids, dtype=object)[k]
    return SampleBatch(feats, names, {"quality": quality_of(spec, z), "latent": z}, labels)


def sample_population(spec, rng: np.random.Generator, n: int = 1, expose_class: bool = False) -> SampleBatch:
    """``n`` independent samples from the (possibly collapsed) population."""
    return decode(spec, sample_latent(spec, rng, n), expose_class)


class PopulationSampler:
    """Generator handle over a spec, optionally improving each latent for quality.

    ``optimizer=None`` or ``budget=1`` gives plain samples; otherwise each
    sample is the winner of an independent ``budget``-evaluation maximization
    of quality with one of :data:`stratfair.moo.OPTIMIZERS`.
    """

    def __init__(self, spec, optimizer: str | None = None, budget: int = 1, expose_class: bool = False, sigma0: float = 0.1):
        if optimizer is not None and optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {optimizer!r}")
        if budget < 1:
            raise ValueError("budget must be >= 1")
        self.spec = spec
        self.optimizer = optimizer
        self.budget = budget
        self.expose_class = expose_class
        self.sigma0 = sigma0
        names = _base(spec).feature_names
        self.feature_names = names + ((CLASS_FEATURE,) if expose_class else ())

    def draw(self, rng: np.random.Generator, n: int) -> SampleBatch:
        if self.optimizer is None or self.budget == 1:
            return sample_population(self.spec, rng, n, self.expose_class)
        lo, hi = latent_bounds(self.spec)
        z, _ = minimize_batch(
            lambda Z: -quality_of(self.spec, Z),
            lambda r, m: sample_latent(self.spec, r, m),
            lo, hi, self.optimizer, self.budget, rng, n_runs=n, sigma0=self.sigma0,
        )
        return decode(self.spec, z, self.expose_class)


class QualityBiasedSampler:
    """Best-of-``B`` wrapper: each output is the highest-quality of ``B`` base draws."""

    def __init__(self, base, B: int):
        if B < 1:
            raise ValueError("B must be >= 1")
        self.base = base
        self.B = B
        self.feature_names = base.feature_names

    def draw(self, rng: np.random.Generator, n: int) -> SampleBatch:
        pool = self.base.draw(rng, n * self.B)
        if n == 0:
            return pool
        q = pool.payload["quality"].reshape(n, self.B)
        pick = np.arange(n) * self.B + q.argmax(axis=1)
        return pool.take(pick)


def quality_biased_sampler(base, B: int, rng: np.random.Generator, n: int = 1) -> SampleBatch:
    """``n`` best-of-``B`` draws from ``base`` (a generator handle with a quality payload)."""
    return QualityBiasedSampler(base, B).draw(rng, n)


def oracle_user(labels: Sequence[Hashable], desired_class: Hashable) -> int | None:
    """Index of the first candidate of the desired class, or None."""
    for i, lab in enumerate(labels):
        if lab == desired_class:
            return i
    return None


def export_dataset(batch: SampleBatch) -> tuple[str, str]:
    """Feature CSV (id + features) and a separate labels CSV (id,label)."""
    fbuf, lbuf = io.StringIO(), io.StringIO()
    fw = csv.writer(fbuf, lineterminator="\n")
    lw = csv.writer(lbuf, lineterminator="\n")
    fw.writerow(["id"] + list(batch.feature_names))
    lw.writerow(["id", "label"])
    labels = batch.reveal_labels()
    for i, row in enumerate(batch.features):
        fw.writerow([i] + [repr(float(v)) for v in row])
        lw.writerow([i, labels[i]])
    return fbuf.getvalue(), lbuf.getvalue()
