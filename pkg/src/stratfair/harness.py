"""Seeded end-to-end experiments producing table-shaped reports.

Four experiments are available through :func:`run_experiment`:

``reweight``
    Diversity loss before and after stratified rejection, over a grid of
    degraded models (baseline x optimizer x budget) and strata sizes (d, M).
``user-assisted``
    Probability that at least one of ``k`` shown candidates belongs to a
    desired class, for multiple single runs and for Pareto-front selectors.
``quality-bias``
    Diversity loss of best-of-B samplers, before and after reweighting.
``detriment-census``
    Random ``(p, p', q, q')`` instances and how often reweighting hurts.

Every cell draws from its own stream derived from ``(seed, cell index)``,
so reports are byte-identical across runs with the same config.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from .analysis import analyze_class, random_instance
from .metrics import FrequencyVector, class_frequencies, diversity_loss, remaining_dl_percent
from .moo import CandidateSet, MultiObjectiveProblem, msr_generate
from .rejection import build_plan, sample_batch
from .strata import Discretizer, FeatureMatrix, estimate_stratum_probs, fit_quantile_bins, select_features
from .subset import select_subset
from .synthgen import (
    CLASS_FEATURE,
    CollapsedModelSpec,
    PopulationSampler,
    PopulationSpec,
    QualityBiasedSampler,
    oracle_user,
)

EXPERIMENTS = ("reweight", "user-assisted", "quality-bias", "detriment-census")

FOUR_CLASS_FREQUENCIES = {"classes": ["A", "B", "C", "D"], "frequencies": [0.178, 0.522, 0.175, 0.124]}

DEFAULT_POPULATION = {
    **FOUR_CLASS_FREQUENCIES,
    "n_features": 8,
    "separation": 3.0,
    "spread": 1.0,
    "quality_slope": 1.0,
    "quality_noise": 1.0,
    "layout_seed": 7,
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    """All knobs of one experiment run. Unknown keys in a config file are rejected."""

    experiment: str = "reweight"
    population: dict = field(default_factory=lambda: dict(DEFAULT_POPULATION))
    population_path: str | None = None
    seeds: list = field(default_factory=lambda: [0])
    # reweight / quality-bias
    n_calibration: int = 20_000
    n_evaluation: int = 20_000
    d_values: list = field(default_factory=lambda: [2])
    M_values: list = field(default_factory=lambda: [2])
    selection: str = "first-d"
    strata: str = "features"  # "features" or "classes" (supervised limit, testing only)
    rho: float = 0.0
    baselines: list = field(default_factory=lambda: [{"name": "base", "gamma": 0.0}, {"name": "collapsed", "gamma": 1.0}])
    optimizers: list = field(default_factory=lambda: ["random-search", "discrete-1+1", "gaussian-es"])
    budgets: list = field(default_factory=lambda: [10, 20, 40])
    alpha: float = 1.0
    max_trials: int = 10_000
    # quality-bias
    gamma: float = 1.0
    # user-assisted
    problem: str = "dominated-class"
    minority_fraction: float = 0.3
    desired_class: str = "B"
    k_values: list = field(default_factory=lambda: [9])
    moo_optimizers: list = field(default_factory=lambda: ["gaussian-es"])
    moo_budget: int = 30
    selectors: list = field(default_factory=lambda: ["msr", "random", "hv", "igd", "cov", "eps", "domain-covering"])
    reference_point: list | None = field(default_factory=lambda: [10.0, 10.0])
    requests: int = 200
    # detriment-census
    instances: int = 10_000
    n_strata: int = 8
    restrict: str = "none"  # "none", "equal-p", "constant-q-prime"
    histogram_bins: int = 20

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg = cls(**obj)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(obj)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if not self.seeds or not all(isinstance(s, int) and s >= 0 for s in self.seeds):
            raise ConfigError("seeds must be a non-empty list of non-negative integers")
        if self.population_path is not None:
            try:
                with open(self.population_path) as fh:
                    self.population = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read population spec {self.population_path}: {exc}") from None
            self.population_path = None
        if self.strata not in ("features", "classes"):
            raise ConfigError("strata must be 'features' or 'classes'")
        if not 0 <= self.rho <= 1:
            raise ConfigError("rho must lie in [0, 1]")
        if self.experiment == "detriment-census" and self.instances < 1:
            raise ConfigError("instances must be positive")
        try:
            self.population_spec()
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid population spec: {exc}") from None

    def population_spec(self) -> PopulationSpec:
        obj = dict(self.population)
        obj.pop("gamma", None)
        freqs = FrequencyVector.normalized(obj["classes"], obj["frequencies"])
        obj["frequencies"] = freqs.values.tolist()
        obj.setdefault("rho", self.rho)
        return PopulationSpec.from_dict(obj)

    def to_dict(self) -> dict:
        return asdict(self)


def cell_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


# -- report helpers ---------------------------------------------------------

def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if np.isnan(v) else f"{float(v):.6f}"
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.writer(buf, lineterminator="\n")
    cols = list(rows[0])
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def rows_to_json(rows: list[dict]) -> str:
    def conv(v):
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        if isinstance(v, float) and np.isnan(v):
            return None
        return v

    return json.dumps([{k: conv(v) for k, v in r.items()} for r in rows], indent=1)


def histogram_rows(values, bins: int, name: str) -> list[dict]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return [
        {"quantity": name, "bin_low": edges[i], "bin_high": edges[i + 1], "count": int(counts[i])}
        for i in range(bins)
    ]


def _check_row(row: dict) -> dict:
    if row["dl_before"] > 0:
        expect = remaining_dl_percent(row["dl_before"], row["dl_after"])
        if not np.isclose(row["remaining_pct"], expect, rtol=1e-12, atol=1e-12):
            raise AssertionError(f"inconsistent remaining_pct in row {row}")
    return row


# -- reweighting --------------------------------------------------------------

def class_strata(n_classes: int) -> Discretizer:
    """Strata equal to the hidden classes, via the exposed class-code feature (testing only)."""
    cuts = tuple(k + 0.5 for k in range(n_classes - 1))
    if n_classes == 1:
        raise ValueError("need at least two classes")
    return Discretizer((CLASS_FEATURE,), (cuts,), n_classes)


def reweight_once(
    target: PopulationSpec,
    model,
    rng: np.random.Generator,
    *,
    d: int,
    M: int,
    n_calibration: int,
    n_evaluation: int,
    selection: str = "first-d",
    strata: str = "features",
    alpha: float = 1.0,
    max_trials: int = 10_000,
    selection_seed: int | None = None,
) -> dict:
    """Calibrate strata, build the plan, and measure diversity loss before and after.

    ``model`` is a generator handle built on a spec sharing ``target``'s
    classes. Returns a dict with ``dl_before``, ``dl_after``,
    ``remaining_pct``, ``mean_trials`` and ``max_ratio``.
    """
    supervised = strata == "classes"
    reference = PopulationSampler(target, expose_class=supervised)
    ref = reference.draw(rng, n_calibration)
    cal = model.draw(rng, n_calibration)
    if supervised:
        disc = class_strata(len(target.class_ids))
    else:
        fm = FeatureMatrix(cal.feature_names, cal.features)
        names = select_features(
            fm, d, selection,
            names=list(target.feature_names[:d]),
            score=cal.payload.get("quality"),
            seed=selection_seed,
        )
        disc = fit_quantile_bins(fm, names, M)
    p = estimate_stratum_probs(disc.assign_array(ref.columns(disc.selected_features)), disc.n_strata, alpha, "reference")
    pp = estimate_stratum_probs(disc.assign_array(cal.columns(disc.selected_features)), disc.n_strata, alpha, "model")
    plan = build_plan(p, pp)

    classes = target.class_ids
    before = model.draw(rng, n_evaluation)
    after, trials = sample_batch(model, disc, plan, rng, n_evaluation, max_trials)
    dl_before = diversity_loss(target.frequencies, class_frequencies(before.reveal_labels(), classes)).delta
    dl_after = diversity_loss(target.frequencies, class_frequencies(after.reveal_labels(), classes)).delta
    return {
        "dl_before": dl_before,
        "dl_after": dl_after,
        "remaining_pct": remaining_dl_percent(dl_before, dl_after) if dl_before > 0 else float("nan"),
        "mean_trials": trials / n_evaluation,
        "max_ratio": plan.max_ratio,
    }


def exp_reweight(cfg: ExperimentConfig) -> list[dict]:
    """One row per (seed, baseline, optimizer, budget, d, M) cell."""
    target = cfg.population_spec()
    rows = []
    for seed in cfg.seeds:
        cell = 0
        for base in cfg.baselines:
            model_spec = CollapsedModelSpec(target, float(base.get("gamma", 0.0)))
            for opt in cfg.optimizers:
                for budget in cfg.budgets:
                    model = PopulationSampler(model_spec, opt, int(budget), expose_class=cfg.strata == "classes")
                    for d in cfg.d_values:
                        for M in cfg.M_values:
                            cell += 1
                            try:
                                res = reweight_once(
                                    target, model, cell_rng(seed, cell),
                                    d=int(d), M=int(M),
                                    n_calibration=cfg.n_calibration, n_evaluation=cfg.n_evaluation,
                                    selection=cfg.selection, strata=cfg.strata, alpha=cfg.alpha,
                                    max_trials=cfg.max_trials, selection_seed=seed,
                                )
                            except Exception as exc:
                                raise RuntimeError(
                                    f"reweight cell seed={seed} baseline={base.get('name')} "
                                    f"optimizer={opt} budget={budget} d={d} M={M}: {exc}"
                                ) from exc
                            rows.append(_check_row({
                                "seed": seed,
                                "baseline": base.get("name", f"gamma{base.get('gamma')}"),
                                "model": f"{opt}-{budget}",
                                "rho": cfg.rho,
                                "d": int(d),
                                "M": int(M),
                                **res,
                            }))
    return rows


def exp_quality_bias(cfg: ExperimentConfig) -> list[dict]:
    """Best-of-B on a collapsed model, reweighted by strata built on ``rho``-weighted features."""
    target = cfg.population_spec()
    base = PopulationSampler(CollapsedModelSpec(target, cfg.gamma))
    rows = []
    for seed in cfg.seeds:
        cell = 0
        for B in cfg.budgets:
            for d in cfg.d_values:
                for M in cfg.M_values:
                    cell += 1
                    try:
                        res = reweight_once(
                            target, QualityBiasedSampler(base, int(B)), cell_rng(seed, cell),
                            d=int(d), M=int(M),
                            n_calibration=cfg.n_calibration, n_evaluation=cfg.n_evaluation,
                            selection=cfg.selection, alpha=cfg.alpha, max_trials=cfg.max_trials,
                            selection_seed=seed,
                        )
                    except Exception as exc:
                        raise RuntimeError(f"quality-bias cell seed={seed} B={B} d={d} M={M}: {exc}") from exc
                    rows.append(_check_row({"seed": seed, "budget": int(B), "rho": cfg.rho, "d": int(d), "M": int(M), **res}))
    return rows


# -- user-assisted generation ------------------------------------------------

def dominated_class_problem(minority_fraction: float = 0.3, gap: float = 3.0, step_size: float = 0.01) -> MultiObjectiveProblem:
    """Two-class problem where every majority-class point Pareto-dominates every minority point.

    Domain ``[0, 1]^2``; the minority class ``B`` is ``x0 > 1 - minority_fraction``.
    Inside each class the two losses trade off along ``x1``; class ``B``
    pays ``gap`` on both and has a local basin pulling ``x0`` towards 1,
    away from class ``A``; local optimizers with a small ``step_size``
    started there mostly stay there.
    """
    if not 0 < minority_fraction < 1:
        raise ValueError("minority_fraction must lie in (0, 1)")
    if gap <= 1:
        raise ValueError("gap must exceed 1 so that class A dominates class B")
    cut = 1.0 - minority_fraction

    def losses(X):
        inB = X[:, 0] > cut
        a = np.column_stack([X[:, 1] ** 2, (1.0 - X[:, 1]) ** 2]) / 2
        basin = np.where(inB, gap + (1.0 - X[:, 0]) / minority_fraction, 0.0)
        return a + basin[:, None]

    def classify(X):
        return np.where(np.atleast_2d(X)[:, 0] > cut, "B", "A")

    return MultiObjectiveProblem(losses, 2, np.zeros(2), np.ones(2), classify=classify, step_size=step_size)


def weight_split_problem(threshold: float = 0.3) -> MultiObjectiveProblem:
    """1-D problem whose scalarized optimum is ``x = w_2``; class ``C`` is ``x < threshold``.

    With simplex-uniform weights an exact optimizer lands in ``C`` with
    probability ``threshold``.
    """

    def losses(X):
        x = X[:, 0]
        return np.column_stack([x**2, (1.0 - x) ** 2])

    def classify(X):
        return np.where(np.atleast_2d(X)[:, 0] < threshold, "C", "other")

    return MultiObjectiveProblem(losses, 2, np.zeros(1), np.ones(1), classify=classify)


PROBLEMS = {"dominated-class": dominated_class_problem, "weight-split": weight_split_problem}


def _problem(cfg: ExperimentConfig) -> MultiObjectiveProblem:
    if cfg.problem == "dominated-class":
        return dominated_class_problem(cfg.minority_fraction)
    if cfg.problem == "weight-split":
        return weight_split_problem(cfg.minority_fraction)
    raise ConfigError(f"unknown problem {cfg.problem!r}; expected one of {sorted(PROBLEMS)}")


def user_request(problem, k: int, optimizer: str, budget: int, selector: str, rng, reference=None) -> list:
    """Hidden labels of the ``k`` candidates shown to the user for one request.

    ``msr`` shows the ``k`` run winners. Other selectors reduce the pool of
    every point evaluated by those runs to ``k`` representatives.
    """
    pool: list = []
    winners = msr_generate(problem, k, optimizer, budget, rng, pool=pool if selector != "msr" else None)
    if selector == "msr":
        return list(winners.labels)
    cset = CandidateSet(pool, problem.n_objectives)
    chosen, _ = select_subset(cset, min(k, len(cset)), selector, reference=reference, rng=rng)
    return list(problem.classify(chosen.X))


def exp_user_assisted(cfg: ExperimentConfig) -> list[dict]:
    """Success percentage (some shown candidate is of the desired class) per algorithm and selector."""
    problem = _problem(cfg)
    rows = []
    for seed in cfg.seeds:
        cell = 0
        for opt in cfg.moo_optimizers:
            for k in cfg.k_values:
                for sel in cfg.selectors:
                    cell += 1
                    rng = cell_rng(seed, cell)
                    hits = 0
                    for _ in range(cfg.requests):
                        labels = user_request(problem, int(k), opt, cfg.moo_budget, sel, rng, cfg.reference_point)
                        hits += oracle_user(labels, cfg.desired_class) is not None
                    rows.append({
                        "seed": seed,
                        "algorithm": f"{opt}-msr{k}",
                        "selector": sel,
                        "k": int(k),
                        "requests": cfg.requests,
                        "success_pct": 100.0 * hits / cfg.requests,
                    })
    return rows


# -- detriment census ----------------------------------------------------------

def exp_detriment_census(cfg: ExperimentConfig, return_changes: bool = False):
    """Summary of random reweighting instances; one row per seed."""
    rows, all_changes = [], []
    for seed in cfg.seeds:
        rng = cell_rng(seed, 0)
        both = detr = equiv = ties = 0
        changes = np.empty(cfg.instances)
        for t in range(cfg.instances):
            p, pp, comp = random_instance(
                rng, cfg.n_strata,
                equal_p=cfg.restrict == "equal-p",
                constant_q_prime=cfg.restrict == "constant-q-prime",
            )
            rep = analyze_class(p, pp, comp)
            inner = float(comp.q_prime @ (pp - p))
            if abs(inner) < 1e-12:
                ties += 1
                equiv += abs(rep.prob_after - rep.prob_before) < 1e-12
            else:
                equiv += (rep.prob_after < rep.prob_before) == (inner > 0)
            both += rep.condition_i and rep.condition_ii
            detr += rep.detrimental
            changes[t] = rep.dl_term_after - rep.dl_term_before
        all_changes.append(changes)
        rows.append({
            "seed": seed,
            "instances": cfg.instances,
            "n_strata": cfg.n_strata,
            "restrict": cfg.restrict,
            "both_conditions_frac": both / cfg.instances,
            "detrimental_frac": detr / cfg.instances,
            "tie_frac": ties / cfg.instances,
            "equivalence_frac": equiv / cfg.instances,
            "mean_dl_change": float(changes.mean()),
            "max_abs_dl_change": float(np.abs(changes).max()),
        })
    if return_changes:
        return rows, np.concatenate(all_changes)
    return rows


def run_experiment(cfg: ExperimentConfig, emit_histogram: bool = False) -> tuple[list[dict], list[dict]]:
    """Run the configured experiment; returns ``(rows, histogram_rows)``."""
    hist: list[dict] = []
    if cfg.experiment == "reweight":
        rows = exp_reweight(cfg)
        if emit_histogram:
            hist = histogram_rows([r["dl_before"] for r in rows], cfg.histogram_bins, "dl_before")
            hist += histogram_rows([r["dl_after"] for r in rows], cfg.histogram_bins, "dl_after")
    elif cfg.experiment == "quality-bias":
        rows = exp_quality_bias(cfg)
        if emit_histogram:
            hist = histogram_rows([r["remaining_pct"] for r in rows], cfg.histogram_bins, "remaining_pct")
    elif cfg.experiment == "user-assisted":
        rows = exp_user_assisted(cfg)
        if emit_histogram:
            hist = histogram_rows([r["success_pct"] for r in rows], cfg.histogram_bins, "success_pct")
    else:
        rows, changes = exp_detriment_census(cfg, return_changes=True)
        if emit_histogram:
            hist = histogram_rows(changes, cfg.histogram_bins, "dl_change")
    return rows, hist


def summarize(rows: list[dict], key: str, value: str) -> dict:
    """Mean and standard error of ``value`` grouped by ``key``."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(r[key], []).append(r[value])
    out = {}
    for g, vals in groups.items():
        v = np.asarray(vals, dtype=float)
        out[g] = (float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0)
    return out
