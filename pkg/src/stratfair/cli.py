"""Command-line entry point.

Subcommands read a JSON config (``--config``) and write into ``--out``::

    stratfair calibrate --config calib.json --out run/
    stratfair plan --config plan.json --out run/
    stratfair sample --config sample.json --seed 3 --out run/
    stratfair evaluate --config eval.json --out run/
    stratfair select --config select.json --format json --out run/
    stratfair experiment reweight --config exp.json --seed 0 --out run/

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .metrics import FrequencyVector, class_frequencies, diversity_loss
from .moo import CandidateSet
from .rejection import ReweightPlan, build_plan, sample_batch
from .strata import (
    Discretizer,
    StratumDistribution,
    estimate_stratum_probs,
    fit_quantile_bins,
    read_feature_csv,
    select_features,
)
from .subset import results_to_csv, results_to_json, select_subset
from .synthgen import CollapsedModelSpec, PopulationSampler, PopulationSpec, export_dataset

log = logging.getLogger("stratfair")


class ConfigError(Exception):
    pass


def _read_config(path) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    return obj


def _resolve(cfg_path, value: str) -> Path:
    """Paths in a config are relative to the config file."""
    p = Path(value)
    return p if p.is_absolute() else Path(cfg_path).parent / p


def _require(cfg: dict, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"config is missing {missing}")


def _existing(cfg_path, cfg: dict, key: str) -> Path:
    p = _resolve(cfg_path, cfg[key])
    if not p.exists():
        raise ConfigError(f"{key}: file {p} does not exist")
    return p


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" not in cfg:
        raise ConfigError("a seed is required (--seed or 'seed' in the config)")
    return int(cfg["seed"])


def cmd_calibrate(args) -> None:
    cfg = _read_config(args.config)
    _require(cfg, "reference_csv", "model_csv", "d", "M")
    label = cfg.get("label_column")
    ref = read_feature_csv(_existing(args.config, cfg, "reference_csv"), label)
    mod = read_feature_csv(_existing(args.config, cfg, "model_csv"), label)
    strategy = cfg.get("selection", "explicit")
    seed = args.seed if args.seed is not None else cfg.get("seed")
    names = select_features(
        mod, int(cfg["d"]), strategy,
        names=cfg.get("features"), score=cfg.get("score_column"), seed=seed,
    )
    disc = fit_quantile_bins(mod, names, int(cfg["M"]))
    alpha = float(cfg.get("alpha", 1.0))
    p = estimate_stratum_probs(disc.assign_matrix(ref), disc.n_strata, alpha, "reference")
    pp = estimate_stratum_probs(disc.assign_matrix(mod), disc.n_strata, alpha, "model")
    _write(args.out, "discretizer.json", disc.to_json())
    _write(args.out, "strata.json", json.dumps({"target": p.to_dict(), "model": pp.to_dict()}))


def cmd_plan(args) -> None:
    cfg = _read_config(args.config)
    _require(cfg, "strata")
    obj = json.loads(_existing(args.config, cfg, "strata").read_text())
    plan = build_plan(StratumDistribution.from_dict(obj["target"]), StratumDistribution.from_dict(obj["model"]))
    _write(args.out, "plan.json", plan.to_json())


def _model_sampler(cfg: dict, cfg_path) -> PopulationSampler:
    if "population_path" in cfg:
        pop = json.loads(_existing(cfg_path, cfg, "population_path").read_text())
    elif "population" in cfg:
        pop = cfg["population"]
    else:
        raise ConfigError("config needs 'population' or 'population_path'")
    try:
        pop = dict(pop)
        gamma = float(pop.pop("gamma", cfg.get("gamma", 0.0)))
        freqs = FrequencyVector.normalized(pop["classes"], pop["frequencies"])
        pop["frequencies"] = freqs.values.tolist()
        spec = CollapsedModelSpec(PopulationSpec.from_dict(pop), gamma)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid population spec: {exc}") from None
    return PopulationSampler(spec, cfg.get("optimizer"), int(cfg.get("budget", 1)))


def cmd_sample(args) -> None:
    cfg = _read_config(args.config)
    _require(cfg, "discretizer", "plan", "n")
    gen = _model_sampler(cfg, args.config)
    disc = Discretizer.from_json(_existing(args.config, cfg, "discretizer").read_text())
    plan = ReweightPlan.from_json(_existing(args.config, cfg, "plan").read_text())
    rng = np.random.default_rng(_seed(args, cfg))
    batch, trials = sample_batch(gen, disc, plan, rng, int(cfg["n"]), int(cfg.get("max_trials", 10_000)))
    features, labels = export_dataset(batch)
    _write(args.out, "samples.csv", features)
    _write(args.out, "labels.csv", labels)
    _write(args.out, "sample_summary.json", json.dumps({"n": len(batch), "trials": trials}))


def _read_labels(path: Path) -> list:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][:2] != ["id", "label"]:
        raise ConfigError(f"{path}: labels file must have header id,label")
    return [r[1] for r in rows[1:]]


def _read_freqs(path: Path) -> FrequencyVector:
    text = path.read_text()
    if path.suffix == ".json":
        return FrequencyVector.from_json(text)
    return FrequencyVector.from_csv(text)


def cmd_evaluate(args) -> None:
    cfg = _read_config(args.config)
    _require(cfg, "target")
    target = _read_freqs(_existing(args.config, cfg, "target"))
    if "observed_labels" in cfg:
        labels = _read_labels(_existing(args.config, cfg, "observed_labels"))
        observed = class_frequencies(labels, target.class_ids)
    elif "observed" in cfg:
        observed = _read_freqs(_existing(args.config, cfg, "observed"))
    else:
        raise ConfigError("config needs 'observed_labels' or 'observed'")
    dl = diversity_loss(target, observed)
    report = {**dl.to_dict(), "observed": observed.as_dict(), "target": target.as_dict()}
    if "dl_before" in cfg and float(cfg["dl_before"]) > 0:
        report["remaining_pct"] = 100.0 * dl.delta / float(cfg["dl_before"])
    if args.format == "json":
        _write(args.out, "evaluation.json", json.dumps(report, indent=1))
    else:
        rows = [
            {
                "class": c,
                "target": target[c],
                "observed": observed[c],
                "ratio": dl.per_class_ratio.get(c, float("nan")),
                "delta": dl.delta,
                "worst_class": dl.worst_class,
            }
            for c in target.class_ids
        ]
        _write(args.out, "evaluation.csv", harness.rows_to_csv(rows))


def cmd_select(args) -> None:
    cfg = _read_config(args.config)
    _require(cfg, "candidates", "m", "methods")
    cset = CandidateSet.from_csv(_existing(args.config, cfg, "candidates").read_text())
    rng = np.random.default_rng(_seed(args, cfg)) if "random" in cfg["methods"] else None
    results = []
    for method in cfg["methods"]:
        _, res = select_subset(cset, int(cfg["m"]), method, reference=cfg.get("reference_point"), rng=rng)
        results.append(res)
    if args.format == "json":
        _write(args.out, "selection.json", results_to_json(results))
    else:
        _write(args.out, "selection.csv", results_to_csv(results))


def cmd_experiment(args) -> None:
    obj = _read_config(args.config) if args.config else {}
    if "population_path" in obj:
        obj["population_path"] = str(_resolve(args.config, obj["population_path"]))
    obj["experiment"] = args.id
    if args.seed is not None:
        obj["seeds"] = [args.seed]
    try:
        cfg = harness.ExperimentConfig.from_dict(obj)
    except (harness.ConfigError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    rows, hist = harness.run_experiment(cfg, emit_histogram=args.emit_histogram)
    stem = args.id.replace("-", "_")
    if args.format == "json":
        _write(args.out, f"{stem}.json", harness.rows_to_json(rows))
    else:
        _write(args.out, f"{stem}.csv", harness.rows_to_csv(rows))
    if args.emit_histogram:
        _write(args.out, f"{stem}_histogram.csv", harness.rows_to_csv(hist))


COMMANDS = {
    "calibrate": cmd_calibrate,
    "plan": cmd_plan,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "select": cmd_select,
    "experiment": cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="seed for every random stream (non-negative)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="stratfair", description="Measure and repair diversity loss in black-box samplers.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="fit strata and estimate stratum probabilities")
    sub.add_parser("plan", parents=[common], help="build a reweighting plan from calibrated strata")
    sub.add_parser("sample", parents=[common], help="draw reweighted samples from a synthetic model")
    sub.add_parser("evaluate", parents=[common], help="diversity-loss report")
    sub.add_parser("select", parents=[common], help="subset selection on a candidate CSV")
    exp = sub.add_parser("experiment", parents=[common], help="run one of the experiments")
    exp.add_argument("id", choices=harness.EXPERIMENTS)
    exp.add_argument("--emit-histogram", action="store_true", help="also write binned counts as CSV")
    return parser


def _origin(exc: BaseException) -> str:
    """Name of the module whose code raised ``exc``."""
    tb = exc.__traceback__
    while tb is not None and tb.tb_next is not None:
        tb = tb.tb_next
    return tb.tb_frame.f_globals.get("__name__", "?") if tb is not None else "?"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.seed is not None and args.seed < 0:
        print("config error: --seed must be non-negative", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error in {args.command} ({_origin(exc)}): {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
