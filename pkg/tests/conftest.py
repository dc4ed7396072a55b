import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from triagekit import synth
from triagekit.dataset import FeatureSpec, RecordTable


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_schema(p: int) -> tuple[FeatureSpec, ...]:
    return tuple(FeatureSpec(f"lab{j}", "U/L") for j in range(p))


def random_table(rng, n=40, p=5, missing=0.3, labeled=True) -> RecordTable:
    values = rng.standard_normal((n, p)) * 10
    values[rng.random((n, p)) < missing] = np.nan
    labels = None
    days = None
    if labeled:
        labels = (rng.random(n) < 0.4).astype(np.int8)
        if labels.sum() == 0:
            labels[0] = 1
        if labels.sum() == n:
            labels[0] = 0
        days = np.where(labels == 1, np.round(rng.gamma(2.0, 3.0, n)), 0.0)
    return RecordTable(tuple(f"p{i}" for i in range(n)), small_schema(p), values,
                       labels, days)


@pytest.fixture(scope="session")
def tiny_demo_table():
    """600-patient draw of the bundled demo profile, shared across tests."""
    return synth.synth_generate(synth.demo_spec(n_patients=600, seed=99))


DEMO_CONFIG = """\
[run]
task = "both"
seed = 7
out = "{out}"

[data.synthetic]
profile = "demo30"
n_patients = 400
prevalence = 0.07

[tune]
budget = 4
n_init = 3
folds = 3

[evaluate]
holdout_fraction = 0.25
calibration = "platt"
calibration_fraction = 0.25

[screen]
enabled = false

[report]
figures = true
"""


def write_demo_config(tmp_dir, out_dir, **overrides) -> str:
    text = DEMO_CONFIG.format(out=str(out_dir).replace("\\", "/"))
    for key, value in overrides.items():
        text = text.replace(key, value)
    path = Path(tmp_dir) / "config.toml"
    path.write_text(text)
    return str(path)


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory):
    """One full small CLI run (report chain) shared by CLI and serve tests."""
    from triagekit.cli import main

    base = tmp_path_factory.mktemp("demo_run")
    out = base / "run"
    config = write_demo_config(base, out)
    code = main(["report", "--config", config, "--quiet"])
    assert code == 0
    return {"config": config, "out": out}
