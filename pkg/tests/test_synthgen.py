import io
import json

import numpy as np
import pytest
from scipy import stats

from stratfair.metrics import FrequencyVector, class_frequencies, diversity_loss
from stratfair.strata import read_feature_csv
from stratfair.synthgen import (
    CLASS_FEATURE,
    CollapsedModelSpec,
    PopulationSampler,
    PopulationSpec,
    QualityBiasedSampler,
    export_dataset,
    load_spec,
    model_frequencies,
    oracle_user,
    quality_biased_sampler,
    sample_population,
)

FOUR_CLASS = FrequencyVector.normalized("ABCD", [0.178, 0.522, 0.175, 0.124])


def spec(**kw):
    kw.setdefault("n_features", 3)
    return PopulationSpec(FOUR_CLASS, **kw)


def within_3sigma(freq, p, n):
    return np.all(np.abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n))


def test_rho_zero_features_do_not_depend_on_class():
    s = spec(rho=0.0, separation=3.0)
    batch = sample_population(s, np.random.default_rng(0), 60_000)
    labels = batch.reveal_labels()
    a = batch.features[labels == "A", 0][:10_000]
    b = batch.features[labels == "B", 0][:10_000]
    assert stats.ks_2samp(a, b).pvalue > 0.001


def test_no_collapse_matches_targets():
    n = 100_000
    batch = sample_population(CollapsedModelSpec(spec(), 0.0), np.random.default_rng(1), n)
    freq = class_frequencies(batch.reveal_labels().tolist(), "ABCD").values
    assert within_3sigma(freq, FOUR_CLASS.values, n)


def test_collapse_gamma_one_squares_and_renormalizes():
    f = np.array([0.178, 0.522, 0.175, 0.124])
    oracle = f**2 / (f**2).sum()
    model = model_frequencies(CollapsedModelSpec(spec(), 1.0)).values
    assert model == pytest.approx(oracle, abs=1e-12)
    assert model == pytest.approx([0.0905, 0.7782, 0.0875, 0.0439], abs=1e-4)
    n = 100_000
    batch = sample_population(CollapsedModelSpec(spec(), 1.0), np.random.default_rng(2), n)
    freq = class_frequencies(batch.reveal_labels().tolist(), "ABCD").values
    assert within_3sigma(freq, oracle, n)


def test_collapse_monotone_in_gamma():
    deltas = [diversity_loss(FOUR_CLASS, model_frequencies(CollapsedModelSpec(spec(), g))).delta for g in (0, 0.5, 1, 2)]
    assert deltas[0] == 0
    assert all(a < b for a, b in zip(deltas, deltas[1:]))


def nearest_centroid_accuracy(batch, labels):
    classes = np.unique(labels)
    X = batch.features
    half = len(X) // 2
    cents = np.array([X[:half][labels[:half] == c].mean(axis=0) for c in classes])
    d = ((X[half:, None, :] - cents[None]) ** 2).sum(axis=2)
    return np.mean(classes[d.argmin(axis=1)] == labels[half:])


def test_informativeness_grows_with_rho():
    accs = []
    for rho in (0.0, 0.5, 1.0):
        batch = sample_population(spec(rho=rho, separation=2.0), np.random.default_rng(3), 20_000)
        accs.append(nearest_centroid_accuracy(batch, batch.reveal_labels()))
    assert accs[0] < accs[1] < accs[2]


def test_best_of_one_is_the_base_sampler():
    base = PopulationSampler(spec())
    a = quality_biased_sampler(base, 1, np.random.default_rng(4), 1000)
    b = base.draw(np.random.default_rng(4), 1000)
    assert np.array_equal(a.features, b.features)


def test_best_of_forty_raises_biggest_class():
    base = PopulationSampler(spec(quality_slope=1.0))
    n = 100_000
    f1 = class_frequencies(QualityBiasedSampler(base, 1).draw(np.random.default_rng(5), n).reveal_labels().tolist(), "ABCD")
    f40 = class_frequencies(QualityBiasedSampler(base, 40).draw(np.random.default_rng(6), n).reveal_labels().tolist(), "ABCD")
    sigma = np.sqrt(f1["B"] * (1 - f1["B"]) / n) + np.sqrt(f40["B"] * (1 - f40["B"]) / n)
    assert f40["B"] - f1["B"] > 3 * sigma


def test_delta_non_decreasing_in_budget():
    base = PopulationSampler(spec(quality_slope=1.0))
    n = 50_000
    deltas = []
    for i, B in enumerate((1, 10, 20, 40)):
        labels = QualityBiasedSampler(base, B).draw(np.random.default_rng(10 + i), n).reveal_labels()
        deltas.append(diversity_loss(FOUR_CLASS, class_frequencies(labels.tolist(), "ABCD")).delta)
    # worst-class ratio standard error is about sqrt(1/(n f)) / 1 < 0.02 here
    assert all(b >= a - 0.02 for a, b in zip(deltas, deltas[1:]))
    assert deltas[-1] > deltas[0]


def test_optimized_sampler_is_deterministic_and_biased():
    s = spec(quality_slope=1.0)
    es = PopulationSampler(s, "gaussian-es", 20)
    a = es.draw(np.random.default_rng(7), 3000)
    b = es.draw(np.random.default_rng(7), 3000)
    assert np.array_equal(a.features, b.features)
    freq = class_frequencies(a.reveal_labels().tolist(), "ABCD")
    assert freq["B"] > FOUR_CLASS["B"] + 0.05


def test_expose_class_feature():
    batch = sample_population(spec(), np.random.default_rng(0), 50, expose_class=True)
    assert batch.feature_names[-1] == CLASS_FEATURE
    codes = batch.features[:, -1].astype(int)
    assert np.array_equal(np.array(list("ABCD"))[codes], batch.reveal_labels())


def test_oracle_user():
    assert oracle_user(["C", "C", "C"], "C") == 0
    assert oracle_user(["A", "B", "C"], "C") == 2
    assert oracle_user(["A", "B"], "C") is None


def test_oracle_user_success_rate():
    rng = np.random.default_rng(8)
    n, k, p = 5000, 4, 0.2
    hits = sum(oracle_user(np.where(rng.random(k) < p, "C", "X").tolist(), "C") is not None for _ in range(n))
    expected = 1 - (1 - p) ** k
    assert abs(hits / n - expected) <= 3 * np.sqrt(expected * (1 - expected) / n)


def test_spec_validation_and_round_trip(tmp_path):
    with pytest.raises(ValueError, match="rho"):
        spec(rho=1.5)
    with pytest.raises(ValueError, match="gamma"):
        CollapsedModelSpec(spec(), -1)
    s = spec(rho=(0.0, 0.5, 1.0))
    again = PopulationSpec.from_dict(s.to_dict())
    assert again.rho == s.rho and np.array_equal(again.class_means, s.class_means)
    path = tmp_path / "pop.json"
    path.write_text(json.dumps({**s.to_dict(), "gamma": 0.5}))
    loaded = load_spec(path)
    assert isinstance(loaded, CollapsedModelSpec) and loaded.gamma == 0.5


def test_export_feeds_feature_reader():
    batch = sample_population(spec(), np.random.default_rng(9), 20)
    features, labels = export_dataset(batch)
    fm = read_feature_csv(io.StringIO(features))
    assert fm.names == batch.feature_names
    assert np.array_equal(fm.values, batch.features)
    assert labels.splitlines()[0] == "id,label"
    assert [r.split(",")[1] for r in labels.splitlines()[1:]] == batch.reveal_labels().tolist()
