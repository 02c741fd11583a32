"""HTTP shim exposing a trained artifact behind the engine's contracts.

Endpoint by artifact kind:
  embedding  POST /embed        {"texts": [...]}            -> {"vectors": [[...]], "dimension": d}
  checker    POST /score_pairs  {"pairs": [[s, t], ...]}    -> {"probabilities": [...]}
  tagger     POST /score        {"sentences": [...]}        -> {"scores": [[7 floats], ...]}

GET /health reports the artifact kind either way.
"""

from pathlib import Path

import uvicorn
from fastapi import FastAPI
from pydantic import BaseModel

from trialtrain import __version__
from trialtrain.artifact import load_artifact
from trialtrain.checker import CheckerArtifact
from trialtrain.embedding import EmbeddingArtifact
from trialtrain.tagger import TaggerArtifact


class EmbedRequest(BaseModel):
    texts: list[str]


class PairsRequest(BaseModel):
    pairs: list[tuple[str, str]]


class ScoreRequest(BaseModel):
    sentences: list[str]


def create_app(artifact) -> FastAPI:
    app = FastAPI(title="trialtrain artifact", version=__version__)
    manifest = artifact.manifest

    @app.get("/health")
    def health():
        return {"kind": manifest["kind"], "version": __version__,
                "base_model": manifest["base_model"]}

    if isinstance(artifact, EmbeddingArtifact):
        @app.post("/embed")
        def embed(req: EmbedRequest):
            return {"vectors": artifact.embed_batch(req.texts),
                    "dimension": artifact.dimension}
    elif isinstance(artifact, CheckerArtifact):
        @app.post("/score_pairs")
        def score_pairs(req: PairsRequest):
            return {"probabilities": artifact.score_batch(req.pairs)}
    elif isinstance(artifact, TaggerArtifact):
        @app.post("/score")
        def score(req: ScoreRequest):
            return {"scores": artifact.score(req.sentences)}
    else:
        raise TypeError(f"unservable artifact {type(artifact).__name__}")
    return app


def serve_artifact(path: Path | str, host: str = "127.0.0.1",
                   port: int = 8790) -> None:
    app = create_app(load_artifact(path))
    uvicorn.run(app, host=host, port=port, log_level="warning")
