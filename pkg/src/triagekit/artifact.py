"""Model artifact (de)serialization.

One JSON file per task holding the imputer, the boosted ensemble as flat
node arrays, the optional calibrator, the feature schema, per-tree
background covers for serving attributions, and training metadata. Reals
go through Python's shortest-round-trip float repr, so a save/load cycle
reproduces predictions bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .calibrate import CalibratorModel
from .dataset import FeatureSpec
from .errors import ArtifactError
from .impute import ImputerModel, SvdConfig
from .trees import GbdtModel

FORMAT_VERSION = 1


@dataclass
class ModelArtifact:
    task: str
    schema: tuple[FeatureSpec, ...]
    imputer: ImputerModel
    model: GbdtModel
    calibrator: CalibratorModel | None = None
    covers: list[np.ndarray] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


def _imputer_to_dict(m: ImputerModel) -> dict:
    return {
        "kind": m.kind,
        "feature_names": list(m.feature_names),
        "medians": None if m.medians is None else m.medians.tolist(),
        "column_means": None if m.column_means is None else m.column_means.tolist(),
        "svd": None if m.svd is None else {
            "rank": m.svd.rank, "shrinkage": m.svd.shrinkage,
            "max_iter": m.svd.max_iter, "tol": m.svd.tol,
        },
        "warnings": list(m.warnings),
    }


def _imputer_from_dict(d: dict) -> ImputerModel:
    svd = None if d["svd"] is None else SvdConfig(**d["svd"])
    return ImputerModel(
        kind=d["kind"],
        feature_names=tuple(d["feature_names"]),
        medians=None if d["medians"] is None else np.asarray(d["medians"]),
        column_means=None if d["column_means"] is None else np.asarray(d["column_means"]),
        svd=svd,
        warnings=tuple(d["warnings"]),
    )


def _calibrator_to_dict(c: CalibratorModel | None) -> dict | None:
    if c is None:
        return None
    return {
        "kind": c.kind, "a": c.a, "b": c.b,
        "breakpoints": None if c.breakpoints is None else c.breakpoints.tolist(),
        "fitted": None if c.fitted is None else c.fitted.tolist(),
    }


def _calibrator_from_dict(d: dict | None) -> CalibratorModel | None:
    if d is None:
        return None
    return CalibratorModel(
        kind=d["kind"], a=d["a"], b=d["b"],
        breakpoints=None if d["breakpoints"] is None else np.asarray(d["breakpoints"]),
        fitted=None if d["fitted"] is None else np.asarray(d["fitted"]),
    )


def save_artifact(path, artifact: ModelArtifact) -> None:
    payload = {
        "format_version": artifact.format_version,
        "task": artifact.task,
        "schema": [{"name": f.name, "unit": f.unit, "kind": f.kind}
                   for f in artifact.schema],
        "imputer": _imputer_to_dict(artifact.imputer),
        "model": artifact.model.to_dict(),
        "calibrator": _calibrator_to_dict(artifact.calibrator),
        "covers": [c.tolist() for c in artifact.covers],
        "metadata": artifact.metadata,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_artifact(path) -> ModelArtifact:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: not a valid model artifact ({exc})") from None
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise ArtifactError(f"{path}: missing format_version")
    if payload["format_version"] != FORMAT_VERSION:
        raise ArtifactError(
            f"{path}: format_version {payload['format_version']!r} not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    if not payload.get("schema"):
        raise ArtifactError(f"{path}: artifact carries an empty feature schema")
    try:
        return ModelArtifact(
            task=payload["task"],
            schema=tuple(FeatureSpec(**f) for f in payload["schema"]),
            imputer=_imputer_from_dict(payload["imputer"]),
            model=GbdtModel.from_dict(payload["model"]),
            calibrator=_calibrator_from_dict(payload["calibrator"]),
            covers=[np.asarray(c, dtype=np.float64) for c in payload["covers"]],
            metadata=payload["metadata"],
            format_version=payload["format_version"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"{path}: truncated or malformed artifact ({exc})") from None
