"""HTTP matching service over an immutable index snapshot.

The service is stateless per request: every handler reads one snapshot
reference up front and works only on it, so a concurrent reload never
changes an in-flight answer. Reload swaps the snapshot atomically via an
admin endpoint.

Match results are produced by shared row-builders that the CLI uses too,
which is what keeps the two surfaces answer-identical by construction.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .cascade import (
    MatchCandidate,
    MatchEngine,
    MockPairChecker,
    PairChecker,
    RemotePairChecker,
)
from .condenser import LexiconTagger, RemoteTagger, SentenceTagger
from .datamodel import (
    Corpus,
    PatientSummary,
    SummaryRef,
    SummarySource,
    TrialSpace,
    assign_split,
    load_corpus,
)
from .embedding import (
    EmbeddingProvider,
    MockEmbeddingProvider,
    RemoteEmbeddingProvider,
    embed,
    text_hash,
)
from .errors import (
    CheckerError,
    ContractViolationError,
    CorpusParseError,
    IndexNotLoadedError,
    TransportError,
)
from .llm import ChatProvider, HttpChatProvider, MockChatProvider
from .vector_index import IndexedItem, ItemMetadata, Side, VectorIndex

logger = logging.getLogger("trialmatch.service")

DEFAULT_PATIENT_K = 10
DEFAULT_SPACE_K = 20

# environment variables override file-configured provider endpoints
_ENV_OVERRIDES = {
    "llm_url": "TRIALMATCH_LLM_URL",
    "embedding_url": "TRIALMATCH_EMBEDDING_URL",
    "tagger_url": "TRIALMATCH_TAGGER_URL",
    "checker_url": "TRIALMATCH_CHECKER_URL",
    "auth_token": "TRIALMATCH_AUTH_TOKEN",
}


@dataclass(frozen=True)
class ServiceConfig:
    """Service and pipeline wiring.

    Provider URLs are optional; a missing URL falls back to the
    deterministic in-process mock, and mock_providers=True forces mocks
    regardless (that is the CLI's --mock-providers). auth_token, when
    set, requires a matching bearer token on every endpoint but health.
    """

    host: str = "127.0.0.1"
    port: int = 8764
    corpus_dir: Optional[str] = None
    index_path: Optional[str] = None
    llm_url: Optional[str] = None
    embedding_url: Optional[str] = None
    tagger_url: Optional[str] = None
    checker_url: Optional[str] = None
    k_patient: int = DEFAULT_PATIENT_K
    k_space: int = DEFAULT_SPACE_K
    threshold: float = 0.5
    auth_token: Optional[str] = None
    cors_origins: tuple[str, ...] = ("*",)
    mock_providers: bool = False

    def __post_init__(self) -> None:
        if self.k_patient < 1 or self.k_space < 1:
            raise ValueError("k_patient and k_space must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold {self.threshold} outside [0,1]")
        object.__setattr__(self, "cors_origins", tuple(self.cors_origins))

    @classmethod
    def load(cls, path: Optional[Path | str] = None,
             env: Optional[dict] = None) -> "ServiceConfig":
        """Config file plus environment overrides; both optional."""
        raw: dict = {}
        if path is not None:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
            unknown = set(raw) - {f.name for f in
                                  cls.__dataclass_fields__.values()}
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
        env = os.environ if env is None else env
        for field_name, var in _ENV_OVERRIDES.items():
            if env.get(var):
                raw[field_name] = env[var]
        if "cors_origins" in raw:
            raw["cors_origins"] = tuple(raw["cors_origins"])
        return cls(**raw)


@dataclass(frozen=True)
class Providers:
    chat: ChatProvider
    embedder: EmbeddingProvider
    tagger: SentenceTagger
    checker: PairChecker


def build_providers(config: ServiceConfig) -> Providers:
    """Remote providers where configured, mocks everywhere else."""
    mock = config.mock_providers
    chat = (HttpChatProvider(config.llm_url)
            if config.llm_url and not mock else MockChatProvider())
    embedder = (RemoteEmbeddingProvider(config.embedding_url)
                if config.embedding_url and not mock
                else MockEmbeddingProvider())
    tagger = (RemoteTagger(config.tagger_url)
              if config.tagger_url and not mock else LexiconTagger())
    checker = (RemotePairChecker(config.checker_url)
               if config.checker_url and not mock else MockPairChecker())
    return Providers(chat=chat, embedder=embedder, tagger=tagger,
                     checker=checker)


def build_index(corpus: Corpus, embedder: EmbeddingProvider) -> VectorIndex:
    """Embed and index every summary (patient side) and space (space side).

    Space open windows come from the corpus trial records; a space whose
    trial record is missing is a corpus defect.
    """
    trials = {t.nct_id: t for t in corpus.trials}
    index = VectorIndex()
    texts = [s.text for s in corpus.summaries] + \
            [sp.raw_text for sp in corpus.spaces]
    vectors = embed(texts, embedder) if texts else []
    for summary, vector in zip(corpus.summaries, vectors):
        index.add(IndexedItem(
            summary.ref.item_id(), Side.PATIENT, vector,
            ItemMetadata(anchor_date=summary.anchor_date,
                         split=assign_split(summary.patient_id))))
    for space, vector in zip(corpus.spaces, vectors[len(corpus.summaries):]):
        trial = trials.get(space.nct_id)
        if trial is None:
            raise CorpusParseError(
                "spaces.jsonl", 0,
                f"space {space.space_id} references trial {space.nct_id} "
                f"with no trial record")
        index.add(IndexedItem(
            space.space_id, Side.SPACE, vector,
            ItemMetadata(nct_id=space.nct_id, open_date=trial.open_date,
                         close_date=trial.close_date)))
    return index


@dataclass(frozen=True)
class Snapshot:
    """Everything one request needs, immutable once built."""

    engine: MatchEngine
    corpus: Corpus
    spaces_by_id: dict[str, TrialSpace] = field(repr=False)
    trials_by_nct: dict = field(repr=False)
    summaries_by_item: dict[str, PatientSummary] = field(repr=False)
    latest_summary: dict[str, PatientSummary] = field(repr=False)

    @property
    def n_patients(self) -> int:
        return self.engine.index.size(Side.PATIENT)

    @property
    def n_spaces(self) -> int:
        return self.engine.index.size(Side.SPACE)


def build_snapshot(config: ServiceConfig,
                   providers: Optional[Providers] = None) -> Snapshot:
    if config.corpus_dir is None:
        raise IndexNotLoadedError("no corpus_dir configured")
    # missing files load as empty, so a bad path must fail loudly here
    if not Path(config.corpus_dir).is_dir():
        raise IndexNotLoadedError(
            f"corpus directory {config.corpus_dir} does not exist")
    providers = providers or build_providers(config)
    corpus = load_corpus(config.corpus_dir, strict=True)
    if config.index_path and Path(config.index_path).exists():
        index = VectorIndex.load(config.index_path)
    else:
        index = build_index(corpus, providers.embedder)
    engine = MatchEngine(
        index=index,
        provider=providers.embedder,
        space_texts={sp.space_id: sp.raw_text for sp in corpus.spaces},
        summary_texts={s.ref.item_id(): s.text for s in corpus.summaries},
        checker=providers.checker,
        threshold=config.threshold,
    )
    latest: dict[str, PatientSummary] = {}
    for summary in corpus.summaries:
        cur = latest.get(summary.patient_id)
        if cur is None or summary.anchor_date >= cur.anchor_date:
            latest[summary.patient_id] = summary
    return Snapshot(
        engine=engine,
        corpus=corpus,
        spaces_by_id={sp.space_id: sp for sp in corpus.spaces},
        trials_by_nct={t.nct_id: t for t in corpus.trials},
        summaries_by_item={s.ref.item_id(): s for s in corpus.summaries},
        latest_summary=latest,
    )


# ---------------------------------------------------------------------------
# Shared row building (service handlers and CLI both call these)


def adhoc_ref(text: str) -> str:
    return f"text:{text_hash(text)[:16]}"


def _patient_row(snapshot: Snapshot, c: MatchCandidate) -> dict:
    space = snapshot.spaces_by_id[c.item_ref]
    return {
        "space_id": space.space_id,
        "nct_id": space.nct_id,
        "raw_text": space.raw_text,
        "rank": c.rank,
        "cosine": c.cosine,
        "checker_prob": c.checker_prob,
        "passed": c.passed,
    }


def _space_row(snapshot: Snapshot, c: MatchCandidate) -> dict:
    summary = snapshot.summaries_by_item[c.item_ref]
    return {
        "item_id": c.item_ref,
        "patient_id": summary.patient_id,
        "anchor_date": summary.anchor_date.isoformat(),
        "split": assign_split(summary.patient_id).value,
        "source": summary.source.value,
        "text": summary.text,
        "rank": c.rank,
        "cosine": c.cosine,
        "checker_prob": c.checker_prob,
        "passed": c.passed,
    }


def match_patient_payload(snapshot: Snapshot, *,
                          summary_text: Optional[str] = None,
                          patient_id: Optional[str] = None,
                          k: int = DEFAULT_PATIENT_K,
                          threshold: Optional[float] = None,
                          as_of_date: Optional[date] = None,
                          show_filtered: bool = False) -> dict:
    """Ranked spaces for one patient, as a JSON-shaped dict.

    Exactly one of summary_text / patient_id. The patient_id path uses the
    patient's latest stored summary and its anchor date; the free-text
    path anchors at as_of_date, defaulting to today. An explicit
    as_of_date always wins. Raises KeyError for an unknown patient_id.
    """
    if (summary_text is None) == (patient_id is None):
        raise ValueError("exactly one of summary_text / patient_id")
    if patient_id is not None:
        stored = snapshot.latest_summary.get(patient_id)
        if stored is None:
            raise KeyError(patient_id)
        summary = (stored if as_of_date is None
                   else replace(stored, anchor_date=as_of_date))
    else:
        if not summary_text.strip():
            raise ValueError("summary_text is empty")
        summary = PatientSummary(
            patient_id=adhoc_ref(summary_text),
            anchor_date=as_of_date or date.today(),
            source=SummarySource.USER_ENTERED,
            text=summary_text)
    candidates = snapshot.engine.match_patient(summary, k,
                                               threshold=threshold)
    rows = [_patient_row(snapshot, c) for c in candidates
            if show_filtered or c.passed]
    return {
        "query_ref": summary.ref.item_id(),
        "k": k,
        "threshold": (snapshot.engine.threshold if threshold is None
                      else threshold),
        "as_of_date": summary.anchor_date.isoformat(),
        "candidates": rows,
    }


def match_space_payload(snapshot: Snapshot, *,
                        space_id: Optional[str] = None,
                        space_text: Optional[str] = None,
                        k: int = DEFAULT_SPACE_K,
                        threshold: Optional[float] = None,
                        show_filtered: bool = False) -> dict:
    """Ranked patient summaries for one trial space.

    The space_id path bounds patient anchors by the trial's open window;
    the free-text path has no window (no trial known). Raises KeyError
    for an unknown space_id.
    """
    if (space_id is None) == (space_text is None):
        raise ValueError("exactly one of space_id / space_text")
    if space_id is not None:
        space = snapshot.spaces_by_id.get(space_id)
        if space is None:
            raise KeyError(space_id)
        candidates = snapshot.engine.match_space(space, k,
                                                 threshold=threshold)
        query_ref = space.space_id
    else:
        if not space_text.strip():
            raise ValueError("space_text is empty")
        candidates = snapshot.engine.match_space_text(space_text, k,
                                                      threshold=threshold)
        query_ref = adhoc_ref(space_text)
    rows = [_space_row(snapshot, c) for c in candidates
            if show_filtered or c.passed]
    return {
        "query_ref": query_ref,
        "k": k,
        "threshold": (snapshot.engine.threshold if threshold is None
                      else threshold),
        "candidates": rows,
    }


# ---------------------------------------------------------------------------
# HTTP layer


class PatientMatchRequest(BaseModel):
    summary_text: Optional[str] = None
    patient_id: Optional[str] = None
    k: Optional[int] = None
    threshold: Optional[float] = None
    as_of_date: Optional[date] = None
    show_filtered: bool = False


class SpaceMatchRequest(BaseModel):
    space_id: Optional[str] = None
    space_text: Optional[str] = None
    k: Optional[int] = None
    threshold: Optional[float] = None
    show_filtered: bool = False


class ReloadRequest(BaseModel):
    corpus_dir: Optional[str] = None
    index_path: Optional[str] = None


def _trial_payload(trial) -> dict:
    return {
        "nct_id": trial.nct_id,
        "title": trial.title,
        "open_date": trial.open_date.isoformat(),
        "close_date": (trial.close_date.isoformat()
                       if trial.close_date else None),
        "eligibility_text": trial.eligibility_text,
    }


def _space_payload(space: TrialSpace) -> dict:
    return {
        "space_id": space.space_id,
        "nct_id": space.nct_id,
        "ordinal": space.ordinal,
        "raw_text": space.raw_text,
        "cancer_type_allowed": space.cancer_type_allowed,
        "histology_allowed": space.histology_allowed,
        "cancer_burden_allowed": space.cancer_burden_allowed,
        "prior_treatment_required": space.prior_treatment_required,
        "prior_treatment_excluded": space.prior_treatment_excluded,
        "biomarkers_required": space.biomarkers_required,
        "biomarkers_excluded": space.biomarkers_excluded,
    }


def _validate_k(k: Optional[int], default: int) -> int:
    k = default if k is None else k
    if k < 1:
        raise HTTPException(400, "k must be >= 1")
    return k


def _validate_threshold(threshold: Optional[float]) -> Optional[float]:
    if threshold is not None and not 0.0 <= threshold <= 1.0:
        raise HTTPException(400, f"threshold {threshold} outside [0,1]")
    return threshold


def create_app(config: ServiceConfig, *,
               providers: Optional[Providers] = None,
               load: bool = True) -> FastAPI:
    """Application over one snapshot; load=False starts empty (409s until
    the admin reload endpoint succeeds)."""
    app = FastAPI(title="trialmatch", version=__version__)
    app.state.config = config
    app.state.providers = providers or build_providers(config)
    app.state.snapshot = None
    app.state.swap_lock = threading.Lock()
    if load and config.corpus_dir is not None:
        app.state.snapshot = build_snapshot(config, app.state.providers)

    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"detail": exc.errors()})

    def authorized(request: Request) -> None:
        token = config.auth_token
        if token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(401, "missing or invalid bearer token")

    def current_snapshot() -> Snapshot:
        snapshot = app.state.snapshot
        if snapshot is None:
            raise HTTPException(409, "index not loaded")
        return snapshot

    auth = Depends(authorized)

    @app.get("/v1/health")
    def health():
        snapshot = app.state.snapshot
        return {
            "status": "ok",
            "version": __version__,
            "index_loaded": snapshot is not None,
            "patients": snapshot.n_patients if snapshot else 0,
            "spaces": snapshot.n_spaces if snapshot else 0,
            "trials": len(snapshot.corpus.trials) if snapshot else 0,
        }

    @app.post("/v1/match/patient", dependencies=[auth])
    def match_patient(body: PatientMatchRequest):
        snapshot = current_snapshot()
        k = _validate_k(body.k, config.k_patient)
        threshold = _validate_threshold(body.threshold)
        try:
            return match_patient_payload(
                snapshot, summary_text=body.summary_text,
                patient_id=body.patient_id, k=k, threshold=threshold,
                as_of_date=body.as_of_date,
                show_filtered=body.show_filtered)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        except KeyError as exc:
            raise HTTPException(404, f"unknown patient_id {exc.args[0]!r}")
        except (TransportError, CheckerError) as exc:
            raise HTTPException(502, f"provider failure: {exc}")

    @app.post("/v1/match/space", dependencies=[auth])
    def match_space(body: SpaceMatchRequest):
        snapshot = current_snapshot()
        k = _validate_k(body.k, config.k_space)
        threshold = _validate_threshold(body.threshold)
        try:
            return match_space_payload(
                snapshot, space_id=body.space_id,
                space_text=body.space_text, k=k, threshold=threshold,
                show_filtered=body.show_filtered)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        except KeyError as exc:
            raise HTTPException(404, f"unknown space_id {exc.args[0]!r}")
        except ContractViolationError as exc:
            raise HTTPException(409, f"index/corpus mismatch: {exc}")
        except (TransportError, CheckerError) as exc:
            raise HTTPException(502, f"provider failure: {exc}")

    @app.get("/v1/trials/{nct_id}", dependencies=[auth])
    def get_trial(nct_id: str):
        snapshot = current_snapshot()
        trial = snapshot.trials_by_nct.get(nct_id)
        if trial is None:
            raise HTTPException(404, f"unknown trial {nct_id!r}")
        return _trial_payload(trial)

    @app.get("/v1/spaces/{space_id}", dependencies=[auth])
    def get_space(space_id: str):
        snapshot = current_snapshot()
        space = snapshot.spaces_by_id.get(space_id)
        if space is None:
            raise HTTPException(404, f"unknown space {space_id!r}")
        return _space_payload(space)

    @app.post("/v1/admin/reload", dependencies=[auth])
    def reload_index(body: ReloadRequest):
        cfg = replace(
            config,
            corpus_dir=body.corpus_dir or config.corpus_dir,
            index_path=body.index_path or config.index_path,
        )
        try:
            fresh = build_snapshot(cfg, app.state.providers)
        except (IndexNotLoadedError, CorpusParseError, OSError,
                ValueError) as exc:
            raise HTTPException(400, f"reload failed: {exc}")
        with app.state.swap_lock:
            app.state.snapshot = fresh
        logger.info("snapshot swapped: %d patients, %d spaces",
                    fresh.n_patients, fresh.n_spaces)
        return {"status": "reloaded", "patients": fresh.n_patients,
                "spaces": fresh.n_spaces}

    return app
