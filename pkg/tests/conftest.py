import numpy as np
import pytest

from stratfair.rejection import SampleBatch
from stratfair.strata import Discretizer


class CategoricalGenerator:
    """Draws a stratum from ``model_probs`` and a class from ``class_given_stratum[s]``.

    The single feature ``s`` is the stratum index itself, so a discretizer
    with thresholds 0.5, 1.5, ... recovers it. ``label_reads`` counts calls to
    ``reveal_labels`` on every batch this generator produced.
    """

    feature_names = ("s",)

    def __init__(self, model_probs, class_given_stratum=None):
        self.model_probs = np.asarray(model_probs, dtype=float)
        k = self.model_probs.size
        self.class_given_stratum = (
            np.eye(k) if class_given_stratum is None else np.asarray(class_given_stratum, dtype=float)
        )
        self.label_reads = 0

    def draw(self, rng, n):
        s = rng.choice(self.model_probs.size, size=n, p=self.model_probs)
        cum = np.cumsum(self.class_given_stratum, axis=1)[s]
        labels = (rng.random(n)[:, None] > cum).sum(axis=1)
        labels = np.minimum(labels, self.class_given_stratum.shape[1] - 1)
        batch = SampleBatch(s[:, None].astype(float), self.feature_names, labels=labels)
        gen = self
        original = batch.reveal_labels

        def counted():
            gen.label_reads += 1
            return original()

        batch.reveal_labels = counted
        return batch


def identity_discretizer(k: int) -> Discretizer:
    return Discretizer(("s",), (tuple(i + 0.5 for i in range(k - 1)),), k)


@pytest.fixture
def categorical_generator():
    return CategoricalGenerator


@pytest.fixture
def stratum_discretizer():
    return identity_discretizer
