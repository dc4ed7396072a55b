"""Run configuration: one TOML file drives the whole pipeline.

Exactly one data source (a CSV path or a synthetic profile) and a seed are
mandatory; everything else has defaults. ``--seed``/``--out`` on the CLI
override the file.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import DomainError, ParseError
from .rebalance import SmoteConfig


@dataclass
class RunConfig:
    task: str = "both"  # special_care | days | both
    seed: int = 0
    out: str = "runs/out"
    data_csv: str | None = None
    synthetic: dict | None = None  # profile, n_patients, prevalence
    impute_special_care: str = "median"
    impute_days: str = "passthrough"
    smote: SmoteConfig = field(default_factory=SmoteConfig)
    tune_budget: int = 40
    tune_n_init: int = 10
    cv_folds: int = 5
    holdout_fraction: float = 0.25
    calibration: str = "platt"  # none | platt | isotonic
    calibration_fraction: float = 0.2
    screen_enabled: bool = True
    screen_folds: int = 5
    explain_background_cap: int = 2000
    explain_top_k: int = 20
    render_figures: bool = True

    def __post_init__(self) -> None:
        if self.task not in ("special_care", "days", "both"):
            raise DomainError(f"unknown task {self.task!r}")
        if (self.data_csv is None) == (self.synthetic is None):
            raise DomainError("config needs exactly one data source (csv or synthetic)")
        if self.calibration not in ("none", "platt", "isotonic"):
            raise DomainError(f"unknown calibration {self.calibration!r}")

    def tasks(self) -> list[str]:
        return ["special_care", "days"] if self.task == "both" else [self.task]

    def imputer_for(self, task: str) -> str:
        return self.impute_special_care if task == "special_care" else self.impute_days

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("out")  # destination does not change what gets computed
        d["smote"] = {"k_neighbors": self.smote.k_neighbors,
                      "target_ratio": self.smote.target_ratio,
                      "undersample_majority": self.smote.undersample_majority}
        return d

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.canonical(), sort_keys=True).encode()
        ).hexdigest()[:16]


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ParseError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None

    run = raw.get("run", {})
    data = raw.get("data", {})
    imp = raw.get("impute", {})
    smote_raw = raw.get("smote", {})
    tune_raw = raw.get("tune", {})
    ev = raw.get("evaluate", {})
    screen_raw = raw.get("screen", {})
    explain_raw = raw.get("explain", {})
    report_raw = raw.get("report", {})

    if "seed" not in run:
        raise DomainError(f"{path}: [run].seed is mandatory")

    smote = SmoteConfig(
        k_neighbors=int(smote_raw.get("k_neighbors", 5)),
        target_ratio=float(smote_raw.get("target_ratio", 1.0)),
        undersample_majority=float(smote_raw.get("undersample_majority", 1.0)),
        seed=int(run["seed"]),
    )
    return RunConfig(
        task=run.get("task", "both"),
        seed=int(run["seed"]),
        out=run.get("out", "runs/out"),
        data_csv=data.get("csv"),
        synthetic=data.get("synthetic"),
        impute_special_care=imp.get("special_care", "median"),
        impute_days=imp.get("days", "passthrough"),
        smote=smote,
        tune_budget=int(tune_raw.get("budget", 40)),
        tune_n_init=int(tune_raw.get("n_init", 10)),
        cv_folds=int(tune_raw.get("folds", 5)),
        holdout_fraction=float(ev.get("holdout_fraction", 0.25)),
        calibration=ev.get("calibration", "platt"),
        calibration_fraction=float(ev.get("calibration_fraction", 0.2)),
        screen_enabled=bool(screen_raw.get("enabled", True)),
        screen_folds=int(screen_raw.get("folds", 5)),
        explain_background_cap=int(explain_raw.get("background_cap", 2000)),
        explain_top_k=int(explain_raw.get("top_k", 20)),
        render_figures=bool(report_raw.get("figures", True)),
    )
