"""Synthetic benchmark runs at the default hyperparameters.

These take tens of minutes on a laptop CPU; run with ``pytest -m slow``.
"""

import numpy as np
import pytest

from src.services.commands import ABLATION_VARIANTS, cmd_ablate, run_variant
from src.services.run_config import RunConfig
from src.services.synthetic import SyntheticSpec, generate_synthetic

pytestmark = pytest.mark.slow

DESIGNATED_KIND = {
    "correlation": "correlation-change",
    "temporal": "frequency-change",
    "spatial": "abrupt-value",
}


@pytest.fixture(scope="module")
def mixed():
    return generate_synthetic(SyntheticSpec.default(m=5, train_length=20000, test_length=5000, seed=11))


@pytest.fixture(scope="module")
def config():
    return RunConfig(workers=4).validate()


def test_full_model_detects_mixed_patterns(mixed, config, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("ablation") / "ablation.csv")
    rows = cmd_ablate(config, mixed, out, variants=list(ABLATION_VARIANTS))
    f1 = {row["variant"]: row["f1_adjusted"] for row in rows}
    assert f1["all"] >= 0.80
    assert all(f1["all"] >= f1[v] for v in ("correlation", "temporal", "spatial"))


@pytest.mark.parametrize("detector", ["correlation", "temporal", "spatial"])
def test_single_detector_finds_its_pattern(detector):
    spec = SyntheticSpec.default(m=5, train_length=20000, test_length=5000, seed=11, kinds=(DESIGNATED_KIND[detector],))
    report = run_variant(RunConfig(detectors=(detector,), workers=4).validate(), generate_synthetic(spec), workers=4)
    assert report.f1_adjusted >= 0.70


def test_compactness_term_does_not_hurt(mixed, config, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("losses") / "losses.csv")
    rows = cmd_ablate(config, mixed, out, variants=["all"], losses=["full", "l1-only"], seeds=[0, 1, 2])
    full = np.mean([r["f1_adjusted"] for r in rows if r["loss"] == "full"])
    l1_only = np.mean([r["f1_adjusted"] for r in rows if r["loss"] == "l1-only"])
    assert full >= l1_only - 0.02
