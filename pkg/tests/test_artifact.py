import json

import numpy as np
import pytest

from conftest import random_table
from triagekit.artifact import ModelArtifact, load_artifact, save_artifact
from triagekit.errors import ArtifactError
from triagekit.explain import sample_background, tree_covers
from triagekit.impute import fit as impute_fit, transform
from triagekit.pipeline import TriagePipeline
from triagekit.rebalance import SmoteConfig
from triagekit.trees import GbdtParams, gbdt_margin, gbdt_predict


def trained_artifact(rng, task="special_care"):
    table = random_table(rng, n=80, p=5, missing=0.3)
    pipe = TriagePipeline(task=task,
                          imputer_kind="median" if task == "special_care" else "passthrough",
                          params=GbdtParams(n_estimators=12, max_depth=4),
                          smote=SmoteConfig(seed=1) if task == "special_care" else None,
                          seed=5).fit(table)
    background = sample_background(table, cap=50, seed=2)
    return table, ModelArtifact(
        task=task,
        schema=table.features,
        imputer=pipe.imputer,
        model=pipe.model,
        calibrator=None,
        covers=tree_covers(pipe.model, background),
        metadata={"seed": 5, "config_hash": "cafe", "best_threshold_margin": 0.1},
    )


def test_round_trip_preserves_predictions_bit_exactly(tmp_path, rng):
    table, art = trained_artifact(rng)
    path = tmp_path / "model.json"
    save_artifact(path, art)
    loaded = load_artifact(path)

    probe = random_table(rng, n=100, p=5, missing=0.4, labeled=False)
    X_a = transform(art.imputer, probe).values
    X_b = transform(loaded.imputer, probe).values
    assert np.array_equal(gbdt_predict(art.model, X_a), gbdt_predict(loaded.model, X_b))
    assert np.array_equal(gbdt_margin(art.model, X_a), gbdt_margin(loaded.model, X_b))
    assert loaded.metadata == art.metadata
    assert [c.tolist() for c in loaded.covers] == [c.tolist() for c in art.covers]


def test_save_is_deterministic(tmp_path, rng):
    _, art = trained_artifact(rng)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_artifact(p1, art)
    save_artifact(p2, art)
    assert p1.read_bytes() == p2.read_bytes()


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    with pytest.raises(ArtifactError):
        load_artifact(path)


def test_unknown_version_rejected(tmp_path, rng):
    _, art = trained_artifact(rng)
    path = tmp_path / "model.json"
    save_artifact(path, art)
    payload = json.loads(path.read_text())
    payload["format_version"] = 99
    path.write_text(json.dumps(payload))
    with pytest.raises(ArtifactError, match="99"):
        load_artifact(path)


def test_truncated_file_rejected(tmp_path, rng):
    _, art = trained_artifact(rng)
    path = tmp_path / "model.json"
    save_artifact(path, art)
    content = path.read_text()
    path.write_text(content[: len(content) // 2])
    with pytest.raises(ArtifactError):
        load_artifact(path)


def test_missing_section_rejected(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({"format_version": 1, "task": "special_care"}))
    with pytest.raises(ArtifactError):
        load_artifact(path)


def test_empty_schema_rejected(tmp_path, rng):
    _, art = trained_artifact(rng)
    path = tmp_path / "model.json"
    save_artifact(path, art)
    payload = json.loads(path.read_text())
    payload["schema"] = []
    path.write_text(json.dumps(payload))
    with pytest.raises(ArtifactError, match="schema"):
        load_artifact(path)
