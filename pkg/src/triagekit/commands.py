"""Implementation of the CLI subcommands.

Every command is a pure function of (config, filesystem): given the same
config and seed it rewrites byte-identical outputs, except for the wall
-clock columns in the screening leaderboard and the tuning trial log.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, calibrate, explain, metrics, synth, trees, tune
from .artifact import ModelArtifact, load_artifact, save_artifact
from .config import RunConfig
from .dataset import (FeatureSpec, RecordTable, load_csv, summarize, write_csv,
                      write_summary_csv, ID_COLUMN, LABEL_COLUMN, DAYS_COLUMN)
from .errors import DomainError, ParseError
from .pipeline import split_holdout, task_kind, train_task, TriagePipeline

TASK_SEED_OFFSET = {"special_care": 0, "days": 1}


def _say(config_quiet: bool, message: str) -> None:
    if not config_quiet:
        print(message, file=sys.stderr)


def load_csv_auto(path) -> RecordTable:
    """Load a CSV inferring the schema from the header (continuous, no unit)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().strip()
    if not header:
        raise ParseError(f"{path}: empty file, expected a header row")
    names = next(csv.reader([header]))
    reserved = {ID_COLUMN, LABEL_COLUMN, DAYS_COLUMN}
    schema = tuple(FeatureSpec(n, "", "continuous") for n in names if n not in reserved)
    return load_csv(path, schema)


def resolve_table(config: RunConfig) -> RecordTable:
    if config.data_csv is not None:
        return load_csv_auto(config.data_csv)
    spec = synthetic_spec(config)
    return synth.synth_generate(spec)


def synthetic_spec(config: RunConfig) -> synth.SyntheticSpec:
    raw = dict(config.synthetic or {})
    profile = raw.pop("profile", "demo30")
    if profile not in synth.PROFILES:
        raise DomainError(f"unknown synthetic profile {profile!r}; "
                          f"known: {sorted(synth.PROFILES)}")
    raw.setdefault("seed", config.seed)
    return synth.PROFILES[profile](**raw)


def _out(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(config: RunConfig, quiet: bool = False) -> list[Path]:
    if config.synthetic is None:
        raise DomainError("cmd_synth needs a [data.synthetic] source")
    out = _out(config)
    table = resolve_table(config)
    path = out / "data.csv"
    write_csv(path, table)
    _say(quiet, f"wrote {path} ({table.n_patients} patients, {table.n_features} features)")
    return [path]


def cmd_explore(config: RunConfig, quiet: bool = False) -> list[Path]:
    out = _out(config)
    table = resolve_table(config)
    stats = summarize(table)
    path = out / "summary.csv"
    write_summary_csv(path, stats)
    _say(quiet, f"wrote {path}")
    return [path]


def cmd_screen(config: RunConfig, quiet: bool = False) -> list[Path]:
    out = _out(config)
    table = resolve_table(config)
    train_table, _ = split_holdout(table, config.holdout_fraction, config.seed)
    written = []
    for task in config.tasks():
        kind = task_kind(task)
        candidates = baselines.default_candidates(kind)
        rows = baselines.screen(candidates, train_table, cv_folds=config.screen_folds,
                                seed=config.seed + TASK_SEED_OFFSET[task])
        path = out / f"leaderboard_{task}.csv"
        baselines.write_leaderboard_csv(path, rows, kind)
        written.append(path)
        _say(quiet, f"wrote {path}")
    return written


def _pipeline_factory(task: str, params_dict: dict, config: RunConfig, seed: int):
    params = trees.GbdtParams.from_dict(params_dict)
    smote = config.smote if task == "special_care" else None

    def factory() -> TriagePipeline:
        return TriagePipeline(task=task, imputer_kind=config.imputer_for(task),
                              params=params, smote=smote, seed=seed)
    return factory


def cmd_tune(config: RunConfig, quiet: bool = False) -> list[Path]:
    out = _out(config)
    table = resolve_table(config)
    train_table, _ = split_holdout(table, config.holdout_fraction, config.seed)
    space = tune.space_from_table4()
    written = []
    for task in config.tasks():
        seed = config.seed + TASK_SEED_OFFSET[task]
        kind = task_kind(task)

        def objective(params_dict: dict, _task=task, _seed=seed, _kind=kind):
            factory = _pipeline_factory(_task, params_dict, config, _seed)
            return tune.cross_validate(factory, train_table, k=config.cv_folds,
                                       seed=_seed, task=_kind)

        # the stock defaults are the first warmup point, so the tuned result
        # can never fall below the default-parameter CV score
        best, history = tune.bayes_opt(
            objective, space, budget=config.tune_budget, n_init=config.tune_n_init,
            direction="maximize", seed=seed,
            initial_params=[trees.GbdtParams().to_dict()],
        )
        trials_path = out / f"trials_{task}.jsonl"
        with open(trials_path, "w", encoding="utf-8") as fh:
            for trial in history:
                fh.write(json.dumps(trial.to_dict()) + "\n")
        best_path = out / f"best_params_{task}.json"
        with open(best_path, "w", encoding="utf-8") as fh:
            json.dump({
                "task": task,
                "params": best.params,
                "cv_score": best.cv_score,
                "fold_scores": list(best.fold_scores),
                "default_cv_score": history[0].cv_score,
                "metric": "roc_auc" if kind == "classify" else "neg_rmse",
            }, fh, indent=1)
            fh.write("\n")
        written.extend([trials_path, best_path])
        _say(quiet, f"tuned {task}: cv={best.cv_score:.4f} "
                    f"(default {history[0].cv_score:.4f}) -> {best_path}")
    return written


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise DomainError(f"missing upstream artifact {path}; run `triagekit {producer}` first")
    return path


def cmd_train(config: RunConfig, quiet: bool = False) -> list[Path]:
    out = _out(config)
    table = resolve_table(config)
    train_table, _ = split_holdout(table, config.holdout_fraction, config.seed)
    written = []
    for task in config.tasks():
        seed = config.seed + TASK_SEED_OFFSET[task]
        best_path = _require(out / f"best_params_{task}.json", "tune")
        with open(best_path, "r", encoding="utf-8") as fh:
            best = json.load(fh)
        params = trees.GbdtParams.from_dict(best["params"])
        calibration = config.calibration if task == "special_care" else "none"
        trained = train_task(
            train_table, task, params, config.imputer_for(task), seed,
            smote=config.smote if task == "special_care" else None,
            calibration=calibration,
            calibration_fraction=config.calibration_fraction,
        )
        background = explain.sample_background(train_table,
                                               cap=config.explain_background_cap,
                                               seed=seed)
        covers = explain.tree_covers(trained.pipeline.model, background)
        art = ModelArtifact(
            task=task,
            schema=train_table.features,
            imputer=trained.pipeline.imputer,
            model=trained.pipeline.model,
            calibrator=trained.calibrator,
            covers=covers,
            metadata={
                "seed": config.seed,
                "config_hash": config.hash(),
                "params": params.to_dict(),
                "cv_score": best["cv_score"],
                "calibration": trained.calibration_kind,
                "best_threshold_margin": trained.threshold_margin,
            },
        )
        path = out / f"model_{task}.json"
        save_artifact(path, art)
        written.append(path)
        _say(quiet, f"wrote {path} ({len(trained.pipeline.model.trees)} trees)")
    return written


def _load_trained(out: Path, task: str) -> ModelArtifact:
    return load_artifact(_require(out / f"model_{task}.json", "train"))


def _scores_for(art: ModelArtifact, table: RecordTable) -> tuple[np.ndarray, np.ndarray]:
    """(raw score, margin) for a table under an artifact's imputer+model."""
    from .impute import transform

    X = transform(art.imputer, table).values
    return trees.gbdt_predict(art.model, X), trees.gbdt_margin(art.model, X)


def _nan_to_null(value):
    """Strict JSON has no NaN; undefined metrics serialize as null."""
    if isinstance(value, dict):
        return {k: _nan_to_null(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_nan_to_null(v) for v in value]
    if isinstance(value, float) and value != value:
        return None
    return value


def _write_points_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def cmd_evaluate(config: RunConfig, quiet: bool = False) -> list[Path]:
    out = _out(config)
    table = resolve_table(config)
    train_table, holdout = split_holdout(table, config.holdout_fraction, config.seed)
    written = []
    combined: dict = {"seed": config.seed, "config_hash": config.hash()}

    for task in config.tasks():
        art = _load_trained(out, task)
        if task == "special_care":
            probs_raw, margins = _scores_for(art, holdout)
            labels = holdout.special_care
            report = metrics.classifier_report(probs_raw, labels)
            entry = dict(report.classify)
            if art.calibrator is not None:
                probs_cal = np.clip(calibrate.apply(art.calibrator, margins), 0.0, 1.0)
                entry["brier_calibrated"] = metrics.brier(probs_cal, labels)
                entry["calibration"] = art.calibrator.kind
                reliability = metrics.reliability_curve(probs_cal, labels, 10)
            else:
                reliability = report.reliability
            entry["threshold_serving_margin"] = art.metadata.get("best_threshold_margin")
            combined["special_care"] = entry
            _write_points_csv(out / "roc.csv", ["fpr", "tpr"], report.roc)
            _write_points_csv(out / "pr.csv", ["recall", "precision"], report.pr)
            _write_points_csv(out / "calibration.csv", ["bin_center", "observed", "count"],
                              reliability)
            written.extend([out / "roc.csv", out / "pr.csv", out / "calibration.csv"])
        else:
            pred, margin = _scores_for(art, holdout)
            baseline = np.full(holdout.n_patients, float(train_table.days.mean()))
            entry = metrics.regress_metrics(margin, holdout.days, baseline)
            combined["days"] = entry
            _write_points_csv(out / "scatter.csv", ["predicted", "true"],
                              list(zip(margin.tolist(), holdout.days.tolist())))
            written.append(out / "scatter.csv")

    path = out / "metrics.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_nan_to_null(combined), fh, indent=1)
        fh.write("\n")
    written.append(path)
    _say(quiet, f"wrote {path}")
    return written


def cmd_explain(config: RunConfig, quiet: bool = False) -> list[Path]:
    out = _out(config)
    table = resolve_table(config)
    train_table, _ = split_holdout(table, config.holdout_fraction, config.seed)
    written = []
    tasks = config.tasks()
    primary = "special_care" if "special_care" in tasks else tasks[0]
    for task in tasks:
        art = _load_trained(out, task)
        from .impute import transform

        imputed = transform(art.imputer, train_table)
        background = explain.sample_background(
            imputed, cap=config.explain_background_cap,
            seed=config.seed + TASK_SEED_OFFSET[task])
        ranking = explain.global_importance(art.model, imputed, background=background)
        name = "importance.csv" if task == primary else f"importance_{task}.csv"
        path = out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature", "mean_abs_attribution"])
            for feat, value in ranking:
                writer.writerow([feat, f"{value:.17g}"])
        written.append(path)
        _say(quiet, f"wrote {path}")
    return written


def cmd_report(config: RunConfig, quiet: bool = False) -> list[Path]:
    """Run the full chain, render figures, and write a manifest."""
    out = _out(config)
    written: list[Path] = []
    if config.synthetic is not None:
        written += cmd_synth(config, quiet)
    written += cmd_explore(config, quiet)
    if config.screen_enabled:
        written += cmd_screen(config, quiet)
    written += cmd_tune(config, quiet)
    written += cmd_train(config, quiet)
    written += cmd_evaluate(config, quiet)
    written += cmd_explain(config, quiet)
    if config.render_figures:
        from .report import render_figures

        written += render_figures(out, config.tasks())

    manifest = {
        "seed": config.seed,
        "config_hash": config.hash(),
        "files": {},
    }
    for path in sorted(set(written)):
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        manifest["files"][str(path.relative_to(out))] = digest
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _say(quiet, f"wrote {manifest_path} ({len(manifest['files'])} files)")
    return written + [manifest_path]
