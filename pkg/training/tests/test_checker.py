import json

import pytest
from conftest import checker_rows, write_schema_file
from trialmatch.evalkit import ScoreLabelSet, auroc

from trialtrain.artifact import load_artifact
from trialtrain.config import ConfigError, TrainConfig
from trialtrain.checker import CheckerArtifact, train_checker

TRAIN_KW = dict(epochs=30, seed=1)


def test_separable_set_reaches_perfect_training_auroc(tmp_path, checker_file):
    artifact = train_checker(TrainConfig(
        output_dir=tmp_path / "chk", checker_file=checker_file, **TRAIN_KW))
    rows = checker_rows()
    probs = artifact.score_batch([(r["summary_text"], r["space_text"])
                                  for r in rows])
    assert all(0.0 < p < 1.0 or p in (0.0, 1.0) for p in probs)
    s = ScoreLabelSet(scores=tuple(probs),
                      labels=tuple(r["label"] for r in rows))
    assert auroc(s) == 1.0


def test_label_inversion_mirrors_probabilities(tmp_path, checker_file):
    inverted_file = write_schema_file(tmp_path / "inverted.jsonl",
                                      "trialmatch.checker_examples",
                                      checker_rows(invert=True))
    original = train_checker(TrainConfig(
        output_dir=tmp_path / "chk", checker_file=checker_file, **TRAIN_KW))
    inverted = train_checker(TrainConfig(
        output_dir=tmp_path / "inv", checker_file=inverted_file, **TRAIN_KW))
    pairs = [(r["summary_text"], r["space_text"]) for r in checker_rows()]
    for p, q in zip(original.score_batch(pairs), inverted.score_batch(pairs)):
        assert q == pytest.approx(1.0 - p, abs=0.1)


def test_probabilities_stay_in_range(tmp_path, checker_file):
    artifact = train_checker(TrainConfig(
        output_dir=tmp_path / "chk", checker_file=checker_file, epochs=2,
        seed=0))
    probs = artifact.score_batch([("anything at all", "some space"),
                                  ("", "")])
    assert all(0.0 <= p <= 1.0 for p in probs)
    assert artifact.score_batch([]) == []


def test_empty_input_rejected(tmp_path):
    empty = write_schema_file(tmp_path / "empty.jsonl",
                              "trialmatch.checker_examples", [])
    with pytest.raises(ConfigError, match="no rows"):
        train_checker(TrainConfig(output_dir=tmp_path / "chk",
                                  checker_file=empty))
    with pytest.raises(ConfigError, match="checker_file"):
        train_checker(TrainConfig(output_dir=tmp_path / "chk"))


def test_single_class_rejected(tmp_path):
    rows = [r for r in checker_rows() if r["label"]]
    path = write_schema_file(tmp_path / "onesided.jsonl",
                             "trialmatch.checker_examples", rows)
    with pytest.raises(ConfigError, match="both label classes"):
        train_checker(TrainConfig(output_dir=tmp_path / "chk",
                                  checker_file=path))


def test_artifact_round_trips_from_disk(tmp_path, checker_file):
    trained = train_checker(TrainConfig(
        output_dir=tmp_path / "chk", checker_file=checker_file, epochs=3,
        seed=2))
    loaded = load_artifact(tmp_path / "chk")
    assert isinstance(loaded, CheckerArtifact)
    pairs = [("patient 0 with metastatic melanoma",
              "space enrolling melanoma patients")]
    assert loaded.score_batch(pairs) == trained.score_batch(pairs)
    manifest = json.loads(
        (tmp_path / "chk" / "manifest.json").read_text())
    assert manifest["kind"] == "checker"
    assert manifest["n_positive"] == 12
