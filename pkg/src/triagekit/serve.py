"""HTTP scoring service over a loaded model artifact pair.

Stateless JSON endpoints on a threading stdlib server; the loaded snapshot
is immutable, so concurrent requests are safe and identical requests get
identical bodies. Predictions are computed with exactly the same library
calls the CLI uses, so served numbers are bit-identical to in-process ones.
"""

from __future__ import annotations

import csv
import json
import math
import sys
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import calibrate, explain, trees
from .artifact import ModelArtifact, load_artifact
from .errors import ArtifactError
from .dataset import RecordTable
from .impute import transform

MAX_OVERRIDES = 64
TOP_ATTRIBUTIONS = 5


@dataclass(frozen=True)
class ServiceSnapshot:
    """Everything a request needs, loaded once and never mutated."""

    classifier: ModelArtifact | None
    days: ModelArtifact | None
    importance: list[dict]

    @property
    def schema(self):
        art = self.classifier or self.days
        return art.schema

    def feature_index(self) -> dict[str, int]:
        return {f.name: i for i, f in enumerate(self.schema)}


def load_snapshot(artifact_dir) -> ServiceSnapshot:
    artifact_dir = Path(artifact_dir)
    classifier = days = None
    cpath = artifact_dir / "model_special_care.json"
    dpath = artifact_dir / "model_days.json"
    if cpath.exists():
        classifier = load_artifact(cpath)
    if dpath.exists():
        days = load_artifact(dpath)
    if classifier is None and days is None:
        raise ArtifactError(
            f"no model_special_care.json or model_days.json under {artifact_dir}; "
            "run `triagekit train` first")
    importance = []
    ipath = artifact_dir / "importance.csv"
    if ipath.exists():
        with open(ipath, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                importance.append({"feature": row["feature"],
                                   "value": float(row["mean_abs_attribution"])})
    return ServiceSnapshot(classifier=classifier, days=days, importance=importance)


class RequestError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _parse_features(snapshot: ServiceSnapshot, raw) -> np.ndarray:
    if not isinstance(raw, dict):
        raise RequestError(400, "features must be an object of name -> number")
    index = snapshot.feature_index()
    row = np.full(len(index), np.nan)
    for name, value in raw.items():
        if name not in index:
            raise RequestError(400, f"unknown feature {name!r}")
        if value is None:
            continue  # explicit null = missing
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise RequestError(400, f"feature {name!r} must be a number")
        if not math.isfinite(value):
            raise RequestError(400, f"feature {name!r} must be finite")
        row[index[name]] = float(value)
    return row


def _row_table(snapshot: ServiceSnapshot, row: np.ndarray) -> RecordTable:
    return RecordTable(("query",), snapshot.schema, row.reshape(1, -1))


def predict_one(snapshot: ServiceSnapshot, features: dict, calibrated: bool = True) -> dict:
    row = _parse_features(snapshot, features)
    table = _row_table(snapshot, row)
    out: dict = {}

    if snapshot.classifier is not None:
        art = snapshot.classifier
        X = transform(art.imputer, table).values
        margin = float(trees.gbdt_margin(art.model, X)[0])
        raw_prob = float(trees.gbdt_predict(art.model, X)[0])
        prob = raw_prob
        used_calibrator = False
        if calibrated and art.calibrator is not None:
            # calibrators consume the raw margin and emit a probability
            prob = min(max(calibrate.apply_scalar(art.calibrator, margin), 0.0), 1.0)
            used_calibrator = True
        threshold_margin = art.metadata.get("best_threshold_margin")
        threshold = None
        if threshold_margin is not None:
            if used_calibrator:
                threshold = min(max(
                    calibrate.apply_scalar(art.calibrator, threshold_margin), 0.0), 1.0)
            else:
                threshold = 1.0 / (1.0 + math.exp(-threshold_margin))
        phi, base = explain.shap_matrix(art.model, X, art.covers)
        order = np.argsort(-np.abs(phi[0]), kind="stable")[:TOP_ATTRIBUTIONS]
        out.update({
            "probability": prob,
            "probability_raw": raw_prob,
            "margin": margin,
            "calibrated": used_calibrator,
            "best_threshold": threshold,
            "threshold_flag": bool(prob >= threshold) if threshold is not None else None,
            "attributions": [
                {"feature": art.model.feature_names[i], "value": float(phi[0][i])}
                for i in order
            ],
            "attribution_base": base,
        })

    if snapshot.days is not None:
        art = snapshot.days
        X = transform(art.imputer, table).values
        raw_days = float(trees.gbdt_margin(art.model, X)[0])
        out.update({
            "expected_days": max(raw_days, 0.0),
            "days_raw": raw_days,
            "days_clamped": bool(raw_days < 0.0),
        })
    return out


def whatif(snapshot: ServiceSnapshot, base: dict, overrides: list) -> list[dict]:
    """Base prediction at index 0, then one per override (merged onto base).

    Override maps replace the base value per feature; null unsets a value.
    Per-element failures come back as error objects in place.
    """
    if len(overrides) > MAX_OVERRIDES:
        raise RequestError(400, f"at most {MAX_OVERRIDES} overrides per call")
    features = base.get("features", {})
    calibrated = bool(base.get("calibrated", True))
    results = [predict_one(snapshot, features, calibrated)]
    for override in overrides:
        if not isinstance(override, dict):
            results.append({"error": "override must be an object"})
            continue
        merged = dict(features)
        merged.update(override)
        try:
            results.append(predict_one(snapshot, merged, calibrated))
        except RequestError as exc:
            results.append({"error": str(exc)})
    return results


def model_meta(snapshot: ServiceSnapshot) -> dict:
    art = snapshot.classifier or snapshot.days
    meta = {
        "format_version": art.format_version,
        "tasks": [t for t, a in (("special_care", snapshot.classifier),
                                 ("days", snapshot.days)) if a is not None],
        "features": [{"name": f.name, "unit": f.unit, "kind": f.kind}
                     for f in snapshot.schema],
        "training": {t: a.metadata for t, a in (("special_care", snapshot.classifier),
                                                ("days", snapshot.days)) if a is not None},
        "importance": snapshot.importance[:20],
    }
    if snapshot.classifier is not None:
        t_margin = snapshot.classifier.metadata.get("best_threshold_margin")
        meta["best_threshold_margin"] = t_margin
        if t_margin is not None:
            meta["best_threshold"] = 1.0 / (1.0 + math.exp(-t_margin))
        cal = snapshot.classifier.calibrator
        meta["calibration"] = cal.kind if cal is not None else "none"
    return meta


def make_handler(state: dict):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):  # quiet by default; tests capture stderr
            if not state.get("quiet", True):
                super().log_message(*args)

        def _send(self, status: int, payload: dict | list) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _snapshot(self) -> ServiceSnapshot:
            snapshot = state.get("snapshot")
            if snapshot is None:
                raise RequestError(503, "models not loaded")
            return snapshot

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b"{}"
            try:
                payload = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                raise RequestError(400, "request body must be valid JSON")
            if not isinstance(payload, dict):
                raise RequestError(400, "request body must be a JSON object")
            return payload

        def do_GET(self):
            try:
                if self.path == "/healthz":
                    self._snapshot()
                    self._send(200, {"status": "ok"})
                elif self.path == "/v1/model/meta":
                    self._send(200, model_meta(self._snapshot()))
                else:
                    self._send(404, {"error": f"unknown path {self.path}"})
            except RequestError as exc:
                self._send(exc.status, {"error": str(exc)})

        def do_POST(self):
            try:
                snapshot = self._snapshot()
                payload = self._body()
                if self.path == "/v1/predict":
                    result = predict_one(snapshot, payload.get("features", {}),
                                         bool(payload.get("calibrated", True)))
                    self._send(200, result)
                elif self.path == "/v1/whatif":
                    base = payload.get("base")
                    if not isinstance(base, dict):
                        raise RequestError(400, "whatif needs a base request object")
                    overrides = payload.get("overrides", [])
                    if not isinstance(overrides, list):
                        raise RequestError(400, "overrides must be a list")
                    self._send(200, whatif(snapshot, base, overrides))
                else:
                    self._send(404, {"error": f"unknown path {self.path}"})
            except RequestError as exc:
                self._send(exc.status, {"error": str(exc)})
            except Exception as exc:  # keep the server alive
                self._send(500, {"error": f"internal: {type(exc).__name__}: {exc}"})

    return Handler


def start_server(artifact_dir, port: int = 0, quiet: bool = True) -> ThreadingHTTPServer:
    """Create a server bound to the port (0 = ephemeral) with models loaded."""
    state = {"snapshot": load_snapshot(artifact_dir), "quiet": quiet}
    server = ThreadingHTTPServer(("127.0.0.1", port), make_handler(state))
    return server


def run_server(artifact_dir, port: int, quiet: bool = False) -> None:
    server = start_server(artifact_dir, port, quiet=quiet)
    if not quiet:
        print(f"triagekit serving on http://127.0.0.1:{server.server_address[1]}",
              file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
