"""Served artifacts must satisfy the matching engine's provider contracts.

Each test boots the shim on a real socket and drives it exclusively
through the engine's own remote-provider clients, ending with a full
retrieve-then-check match powered by trained artifacts over HTTP.
"""

import socket
import threading
import time
from datetime import date

import httpx
import pytest
import uvicorn
from conftest import write_schema_file
from trialmatch.cascade import MatchEngine, RemotePairChecker
from trialmatch.condenser import RemoteTagger, TagScores
from trialmatch.datamodel import PatientSummary, Split, SummarySource
from trialmatch.embedding import RemoteEmbeddingProvider, embed
from trialmatch.vector_index import (
    IndexedItem,
    ItemMetadata,
    Side,
    VectorIndex,
)

from trialtrain.config import TrainConfig
from trialtrain.checker import train_checker
from trialtrain.embedding import train_embedding
from trialtrain.serve import create_app
from trialtrain.tagger import train_tagger


def _serve(artifact):
    """Run the shim on a free port; yields the base url, then stops it."""
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    config = uvicorn.Config(create_app(artifact), host="127.0.0.1",
                            port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("shim server did not start")
        time.sleep(0.02)
    return server, thread, f"http://127.0.0.1:{port}"


@pytest.fixture
def served():
    servers = []

    def start(artifact):
        server, thread, url = _serve(artifact)
        servers.append((server, thread))
        return url

    yield start
    for server, thread in servers:
        server.should_exit = True
        thread.join(timeout=5)


def test_embedding_contract(tmp_path, ranking_file, served):
    artifact = train_embedding(TrainConfig(
        output_dir=tmp_path / "emb", ranking_file=ranking_file, epochs=2,
        seed=1))
    url = served(artifact)
    assert httpx.get(f"{url}/health").json()["kind"] == "embedding"

    provider = RemoteEmbeddingProvider(url)
    vectors = embed(["metastatic melanoma", "weather report"], provider)
    assert provider.dimension == 128
    assert len(vectors) == 2
    for v in vectors:
        assert len(v.values) == 128
        assert float(v.values @ v.values) == pytest.approx(1.0)
    # the JSON hop must not perturb values: remote equals in-process
    local = artifact.embed_batch(["metastatic melanoma"])[0]
    assert provider.embed_batch(["metastatic melanoma"])[0] == local


def test_checker_contract(tmp_path, checker_file, served):
    artifact = train_checker(TrainConfig(
        output_dir=tmp_path / "chk", checker_file=checker_file, epochs=20,
        seed=1))
    url = served(artifact)
    checker = RemotePairChecker(url)
    pairs = [("patient 0 with metastatic melanoma",
              "space enrolling melanoma patients"),
             ("patient 1 with metastatic lymphoma",
              "space enrolling melanoma patients")]
    probs = checker.score_batch(pairs)
    assert len(probs) == 2
    assert all(0.0 <= p <= 1.0 for p in probs)
    assert probs[0] > probs[1]
    assert probs == artifact.score_batch(pairs)


def test_tagger_contract(tmp_path, tagger_file, served):
    artifact = train_tagger(TrainConfig(
        output_dir=tmp_path / "tag", tagger_file=tagger_file, epochs=5,
        seed=1))
    url = served(artifact)
    tagger = RemoteTagger(url)
    rows = tagger.score(["metastatic spread noted", "lot B was full"])
    assert len(rows) == 2
    for row in rows:
        scores = TagScores.from_row(row)  # validates 7 floats in [0, 1]
        assert 0.0 <= scores.any_tag <= 1.0


def test_match_engine_runs_on_served_artifacts(tmp_path, ranking_file,
                                               served):
    # cover every (disease, space) combination so pass/fail assertions
    # only touch pairs the checker actually learned
    rows = []
    for i in range(6):
        for disease in ("melanoma", "lymphoma"):
            for space in ("melanoma", "lymphoma"):
                rows.append({
                    "summary_text": f"patient {i} with metastatic {disease}",
                    "space_text": f"space enrolling {space} patients",
                    "label": disease == space, "provenance": "checker",
                    "patient_id": f"p{i:05d}", "space_id": "s#1"})
    pair_file = write_schema_file(tmp_path / "pairs.jsonl",
                                  "trialmatch.checker_examples", rows)
    emb = train_embedding(TrainConfig(
        output_dir=tmp_path / "emb", ranking_file=ranking_file, epochs=10,
        seed=2))
    chk = train_checker(TrainConfig(
        output_dir=tmp_path / "chk", checker_file=pair_file, epochs=20,
        seed=2))
    provider = RemoteEmbeddingProvider(served(emb))
    checker = RemotePairChecker(served(chk))

    space_texts = {
        "NCT9#1": "space enrolling melanoma patients",
        "NCT9#2": "trial enrolling kappa3 cohort",
        "NCT9#3": "space enrolling lymphoma patients",
    }
    index = VectorIndex()
    for space_id, vector in zip(space_texts,
                                embed(list(space_texts.values()), provider)):
        index.add(IndexedItem(space_id, Side.SPACE, vector, ItemMetadata(
            nct_id="NCT9", open_date=date(2018, 1, 1))))
    summary = PatientSummary(
        patient_id="p00001", anchor_date=date(2020, 6, 1),
        source=SummarySource.STANDARD_OF_CARE,
        text="patient 0 with metastatic melanoma")
    index.add(IndexedItem(
        summary.ref.item_id(), Side.PATIENT,
        embed([summary.text], provider)[0],
        ItemMetadata(anchor_date=summary.anchor_date, split=Split.TRAIN)))

    engine = MatchEngine(index=index, provider=provider,
                         space_texts=space_texts,
                         summary_texts={summary.ref.item_id(): summary.text},
                         checker=checker)
    candidates = engine.match_patient(summary, k=3, threshold=0.5)
    assert [c.rank for c in candidates] == [1, 2, 3]
    by_id = {c.item_ref: c for c in candidates}
    assert by_id["NCT9#1"].passed
    assert not by_id["NCT9#3"].passed
    for c in candidates:
        assert 0.0 <= c.checker_prob <= 1.0
