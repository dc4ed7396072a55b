import csv
import json
import math
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from triagekit import calibrate, trees
from triagekit.artifact import load_artifact
from triagekit.dataset import RecordTable
from triagekit.explain import shap_matrix
from triagekit.impute import transform
from triagekit.serve import load_snapshot, predict_one, start_server, whatif


@pytest.fixture(scope="module")
def server(demo_run):
    httpd = start_server(demo_run["out"], port=0, quiet=True)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    port = httpd.server_address[1]
    yield f"http://127.0.0.1:{port}", demo_run["out"]
    httpd.shutdown()
    httpd.server_close()


def call(base, path, payload=None):
    if payload is None:
        request = urllib.request.Request(base + path)
    else:
        data = json.dumps(payload).encode()
        request = urllib.request.Request(base + path, data=data,
                                         headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(request) as response:
        return response.status, json.loads(response.read().decode())


def call_error(base, path, payload=None):
    try:
        return call(base, path, payload)
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read().decode())


def test_healthz(server):
    status, body = call(server[0], "/healthz")
    assert status == 200 and body == {"status": "ok"}


def test_empty_feature_map_valid(server):
    status, body = call(server[0], "/v1/predict", {"features": {}})
    assert status == 200
    assert 0.0 <= body["probability"] <= 1.0
    assert body["expected_days"] >= 0.0
    assert len(body["attributions"]) == 5


def test_unknown_feature_400(server):
    status, body = call_error(server[0], "/v1/predict",
                              {"features": {"NotAFeature": 1.0}})
    assert status == 400 and "NotAFeature" in body["error"]


def test_non_finite_rejected(server):
    status, body = call_error(server[0], "/v1/predict",
                              {"features": {"Age": float("inf")}})
    assert status == 400
    status, body = call_error(server[0], "/v1/predict",
                              {"features": {"Age": "old"}})
    assert status == 400


def test_predict_parity_with_library(server):
    base_url, out = server
    snapshot = load_snapshot(out)
    art = load_artifact(out / "model_special_care.json")
    days_art = load_artifact(out / "model_days.json")

    features = {"Age": 71.0, "Leukocytes": 15200.0, "Lymphocytes_pct": 8.0,
                "CRP": 180.0, "Sex": 1.0}
    status, body = call(base_url, "/v1/predict", {"features": features})
    assert status == 200

    row = np.full(len(art.schema), np.nan)
    index = {f.name: i for i, f in enumerate(art.schema)}
    for name, value in features.items():
        row[index[name]] = value
    table = RecordTable(("q",), art.schema, row.reshape(1, -1))

    X = transform(art.imputer, table).values
    margin = float(trees.gbdt_margin(art.model, X)[0])
    raw_prob = float(trees.gbdt_predict(art.model, X)[0])
    calibrated = min(max(calibrate.apply_scalar(art.calibrator, margin), 0.0), 1.0)
    assert body["probability_raw"] == raw_prob  # bit-exact through JSON
    assert body["probability"] == calibrated
    assert body["margin"] == margin

    X_days = transform(days_art.imputer, table).values
    raw_days = float(trees.gbdt_margin(days_art.model, X_days)[0])
    assert body["days_raw"] == raw_days
    assert body["expected_days"] == max(raw_days, 0.0)
    assert body["days_clamped"] == (raw_days < 0.0)

    phi, _ = shap_matrix(art.model, X, art.covers)
    top = sorted(range(len(phi[0])), key=lambda i: (-abs(phi[0][i]), i))[:5]
    served = [a["feature"] for a in body["attributions"]]
    assert served == [art.model.feature_names[i] for i in top]
    for entry, i in zip(body["attributions"], top):
        assert entry["value"] == phi[0][i]

    # in-process service layer agrees with the HTTP layer bit-exactly
    direct = predict_one(snapshot, features)
    assert direct["probability"] == body["probability"]


def test_threshold_flag_consistent(server):
    status, body = call(server[0], "/v1/predict",
                        {"features": {"Age": 85.0, "CRP": 200.0, "DHL": 1500.0}})
    assert status == 200
    assert body["threshold_flag"] == (body["probability"] >= body["best_threshold"])


def test_uncalibrated_request(server):
    features = {"Age": 60.0}
    status, body = call(server[0], "/v1/predict",
                        {"features": features, "calibrated": False})
    assert status == 200
    assert body["calibrated"] is False
    assert body["probability"] == body["probability_raw"]


def test_whatif_base_at_index_zero_and_parity(server):
    base_features = {"Age": 55.0, "Leukocytes": 9000.0}
    payload = {
        "base": {"features": base_features},
        "overrides": [{}, {"Age": 85.0}, {"Leukocytes": None}],
    }
    status, body = call(server[0], "/v1/whatif", payload)
    assert status == 200
    assert len(body) == 4
    # element 0 is the base; an empty override equals the base
    assert body[1] == body[0]
    # each element equals a standalone predict of the merged row
    status2, merged = call(server[0], "/v1/predict",
                           {"features": {"Age": 85.0, "Leukocytes": 9000.0}})
    assert body[2] == merged
    status3, dropped = call(server[0], "/v1/predict", {"features": {"Age": 55.0}})
    assert body[3] == dropped


def test_whatif_per_element_errors(server):
    payload = {"base": {"features": {"Age": 50.0}},
               "overrides": [{"Bogus": 1.0}, {"Age": 20.0}]}
    status, body = call(server[0], "/v1/whatif", payload)
    assert status == 200
    assert "error" in body[1] and "Bogus" in body[1]["error"]
    assert "probability" in body[2]


def test_whatif_override_limit(server):
    payload = {"base": {"features": {}}, "overrides": [{} for _ in range(65)]}
    status, body = call_error(server[0], "/v1/whatif", payload)
    assert status == 400


def test_meta_matches_schema_and_importance(server):
    base_url, out = server
    status, meta = call(base_url, "/v1/model/meta")
    assert status == 200
    assert len(meta["features"]) == 30
    assert meta["tasks"] == ["special_care", "days"]
    assert meta["calibration"] == "platt"
    with open(out / "importance.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [e["feature"] for e in meta["importance"]] == \
        [r["feature"] for r in rows[:20]]
    # immutable snapshot: identical across calls
    status, again = call(base_url, "/v1/model/meta")
    assert again == meta


def test_units_present_in_meta(server):
    status, meta = call(server[0], "/v1/model/meta")
    units = {f["name"]: f["unit"] for f in meta["features"]}
    assert units["Age"] == "years"
    assert units["Leukocytes"] == "/mm3"


def test_unknown_path_404(server):
    status, _ = call_error(server[0], "/v1/nope", {})
    assert status == 404


def test_concurrent_identical_requests_identical_bodies(server):
    results = []

    def hit():
        results.append(call(server[0], "/v1/predict",
                            {"features": {"Age": 44.0, "CRP": 10.0}}))

    threads = [threading.Thread(target=hit) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    bodies = [json.dumps(b, sort_keys=True) for _, b in results]
    assert len(set(bodies)) == 1


def test_whatif_empty_overrides_returns_base_only(server):
    payload = {"base": {"features": {"Age": 50.0}}, "overrides": []}
    status, body = call(server[0], "/v1/whatif", payload)
    assert status == 200
    assert len(body) == 1
    status2, direct = call(server[0], "/v1/predict", {"features": {"Age": 50.0}})
    assert body[0] == direct


def test_days_only_artifact_dir(tmp_path, demo_run):
    import shutil

    shutil.copy(demo_run["out"] / "model_days.json", tmp_path / "model_days.json")
    httpd = start_server(tmp_path, port=0, quiet=True)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{httpd.server_address[1]}"
    try:
        status, meta = call(base, "/v1/model/meta")
        assert meta["tasks"] == ["days"]
        assert len(meta["features"]) == 30
        status, body = call(base, "/v1/predict", {"features": {"Age": 70.0}})
        assert status == 200
        assert "expected_days" in body and "probability" not in body
    finally:
        httpd.shutdown()
        httpd.server_close()


def test_empty_artifact_dir_rejected(tmp_path):
    from triagekit.errors import ArtifactError

    with pytest.raises(ArtifactError, match="train"):
        load_snapshot(tmp_path)
