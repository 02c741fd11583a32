"""Retrieval and classification metrics, distribution diagnostics, and
protocol-level report assembly.

Conventions that the underlying formulas leave open are fixed here and
tested against brute-force oracles:

- precision and MAP are macro averaged per query; queries that returned
  zero results are excluded from the mean but enumerated in the report.
- average precision normalizes by the number of relevant results
  retrieved within the cutoff, since total relevant per query is not
  knowable in this setting. A query with no relevant results scores 0.
- AUROC uses the rank formulation with ties counted half.
- AUPRC integrates the precision envelope stepwise over recall.
- MMD is the biased (V-statistic) squared estimator with a Gaussian
  kernel, bandwidth set to the median pairwise distance of the pooled
  sample; the permutation p-value is (1 + #{perm >= observed}) / (1 + P).
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from statistics import fmean
from typing import Iterable, Mapping, NamedTuple, Optional, Protocol as TypingProtocol, Sequence

import numpy as np

from .cascade import MatchEngine
from .datamodel import Corpus, PairLabel, PatientSummary, Split, TrialSpace, assign_split
from .errors import DecisionParseError, UndefinedMetricError
from .llm import ChatProvider, check_reasonable

logger = logging.getLogger("trialmatch.evalkit")


class Protocol(str, Enum):
    PATIENT_CENTRIC_K10 = "patient_centric_k10"
    TRIAL_CENTRIC_K20 = "trial_centric_k20"

    @property
    def k(self) -> int:
        return 10 if self is Protocol.PATIENT_CENTRIC_K10 else 20


class Variant(str, Enum):
    RETRIEVAL_ONLY = "retrieval_only"
    RETRIEVAL_PLUS_CHECKER = "retrieval_plus_checker"


@dataclass(frozen=True)
class RankedJudgments:
    """Ordered relevance judgments for one query, best rank first."""

    query_id: str
    relevant: tuple[bool, ...]

    def __post_init__(self) -> None:
        rels = tuple(self.relevant)
        if not all(isinstance(r, bool) for r in rels):
            raise ValueError("relevance judgments must be booleans")
        object.__setattr__(self, "relevant", rels)


@dataclass(frozen=True)
class ScoreLabelSet:
    """Parallel score/label arrays for threshold-free classifier metrics."""

    scores: tuple[float, ...]
    labels: tuple[bool, ...]

    def __post_init__(self) -> None:
        scores = tuple(float(s) for s in self.scores)
        labels = tuple(self.labels)
        if len(scores) != len(labels):
            raise ValueError("scores and labels must have equal length")
        if not all(isinstance(l, bool) for l in labels):
            raise ValueError("labels must be booleans")
        for s in scores:
            if not math.isfinite(s) or not 0.0 <= s <= 1.0:
                raise ValueError(f"score {s!r} outside [0, 1]")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @property
    def n_positive(self) -> int:
        return sum(self.labels)

    @property
    def n_negative(self) -> int:
        return len(self.labels) - self.n_positive


class CalibrationBin(NamedTuple):
    bin_mid: float
    mean_score: float
    frac_positive: float
    count: int


class MmdResult(NamedTuple):
    statistic: float
    p_value: float


class CohesionResult(NamedTuple):
    within: float
    between: float


@dataclass(frozen=True)
class EvalReport:
    protocol: Protocol
    variant: Variant
    precision_at_k: float
    map_at_k: float
    median_results: float
    mean_results: float
    n_queries: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.precision_at_k <= 1.0:
            raise ValueError("precision must be within [0, 1]")
        if not 0.0 <= self.map_at_k <= 1.0:
            raise ValueError("MAP must be within [0, 1]")
        if self.n_queries < 0:
            raise ValueError("n_queries must be non-negative")


@dataclass(frozen=True)
class ProtocolResult:
    """Both report variants plus the per-query exclusions behind them."""

    retrieval_only: EvalReport
    with_checker: EvalReport
    missing_gold: tuple[tuple[str, str], ...] = ()
    zero_result_queries: tuple[str, ...] = ()
    zero_survivor_queries: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Ranking metrics


def precision_at_k(judgments: Iterable[RankedJudgments]) -> float:
    """Macro-averaged fraction of returned results that are relevant.

    The denominator per query is the returned count, which may be below
    the protocol k after checker filtering.
    """
    rows = [j for j in judgments if j.relevant]
    if not rows:
        raise UndefinedMetricError("every query returned zero results")
    return fmean(sum(j.relevant) / len(j.relevant) for j in rows)


def average_precision_at_k(judgments: RankedJudgments) -> float:
    if not judgments.relevant:
        raise UndefinedMetricError(f"query {judgments.query_id!r} returned zero results")
    hits = 0
    total = 0.0
    for position, rel in enumerate(judgments.relevant, start=1):
        if rel:
            hits += 1
            total += hits / position
    return total / max(1, hits)


def map_at_k(judgments: Iterable[RankedJudgments]) -> float:
    rows = [j for j in judgments if j.relevant]
    if not rows:
        raise UndefinedMetricError("every query returned zero results")
    return fmean(average_precision_at_k(j) for j in rows)


# ---------------------------------------------------------------------------
# Classifier metrics


def auroc(s: ScoreLabelSet) -> float:
    """Probability a random positive outscores a random negative, ties half.

    Computed from average ranks, which equals the exhaustive pairwise
    count without the quadratic loop.
    """
    n_pos, n_neg = s.n_positive, s.n_negative
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both classes present")
    order = sorted(range(len(s.scores)), key=lambda i: s.scores[i])
    ranks = [0.0] * len(s.scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and s.scores[order[j + 1]] == s.scores[order[i]]:
            j += 1
        avg_rank = (i + j) / 2 + 1  # 1-based
        for idx in order[i : j + 1]:
            ranks[idx] = avg_rank
        i = j + 1
    rank_sum = sum(r for r, lab in zip(ranks, s.labels) if lab)
    u = rank_sum - n_pos * (n_pos + 1) / 2
    return u / (n_pos * n_neg)


def auprc(s: ScoreLabelSet) -> float:
    """Area under the precision envelope integrated stepwise over recall.

    Tied scores form one threshold group, so precision/recall points are
    taken only at distinct score boundaries.
    """
    n_pos, n_neg = s.n_positive, s.n_negative
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUPRC needs both classes present")
    order = sorted(range(len(s.scores)), key=lambda i: -s.scores[i])
    points = []  # (recall, precision) at each distinct threshold
    tp = predicted = 0
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and s.scores[order[j + 1]] == s.scores[order[i]]:
            j += 1
        for idx in order[i : j + 1]:
            predicted += 1
            tp += s.labels[idx]
        points.append((tp / n_pos, tp / predicted))
        i = j + 1
    area = 0.0
    envelope = 0.0
    prev_recall = points[-1][0]
    for recall, precision in reversed(points):
        # the segment right of this point must not see this point's own
        # precision, or a mixed tie group inflates the area
        area += (prev_recall - recall) * envelope
        envelope = max(envelope, precision)
        prev_recall = recall
    area += prev_recall * envelope  # segment from recall 0 to the first point
    return area


def calibration_curve(s: ScoreLabelSet, bins: int = 10) -> list[CalibrationBin]:
    """Equal-width score bins over [0, 1]; empty bins are omitted.

    A score of exactly 1.0 lands in the top bin.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not s.scores:
        raise UndefinedMetricError("calibration curve needs at least one score")
    grouped: dict[int, list[int]] = {}
    for i, score in enumerate(s.scores):
        grouped.setdefault(min(int(score * bins), bins - 1), []).append(i)
    out = []
    for b in sorted(grouped):
        members = grouped[b]
        out.append(CalibrationBin(
            bin_mid=(b + 0.5) / bins,
            mean_score=fmean(s.scores[i] for i in members),
            frac_positive=sum(s.labels[i] for i in members) / len(members),
            count=len(members),
        ))
    return out


# ---------------------------------------------------------------------------
# Distribution diagnostics

_MMD_BATCH = 512


def mmd_test(x, y, permutations: int = 10_000, seed: int = 0) -> MmdResult:
    """Permutation test of distribution equality between two vector samples.

    Biased squared-MMD with Gaussian kernel exp(-d^2 / (2 h^2)), h the
    median pairwise distance over the pooled sample (1.0 when degenerate).
    """
    X = np.asarray(x, dtype=np.float64)
    Y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise ValueError("inputs must be 2-D with matching dimensionality")
    m, n = X.shape[0], Y.shape[0]
    if m < 2 or n < 2:
        raise ValueError("each sample needs at least 2 vectors")
    if permutations < 1:
        raise ValueError("permutations must be >= 1")

    Z = np.vstack([X, Y])
    total = m + n
    sq = np.einsum("ij,ij->i", Z, Z)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    np.maximum(d2, 0.0, out=d2)
    upper = d2[np.triu_indices(total, k=1)]
    h = float(np.median(np.sqrt(upper))) if upper.size else 0.0
    if h == 0.0:
        h = 1.0
    K = np.exp(d2 / (-2.0 * h * h))
    grand = float(K.sum())
    row_sums = K.sum(axis=1)

    def stat(s_aa: np.ndarray, s_rows: np.ndarray) -> np.ndarray:
        s_bb = grand - 2.0 * s_rows + s_aa
        s_ab = s_rows - s_aa
        return s_aa / (m * m) + s_bb / (n * n) - 2.0 * s_ab / (m * n)

    observed = float(stat(K[:m, :m].sum(), row_sums[:m].sum()))
    observed = max(observed, 0.0)

    rng = np.random.default_rng(seed)
    exceed = 0
    done = 0
    while done < permutations:
        batch = min(_MMD_BATCH, permutations - done)
        indicator = np.zeros((batch, total))
        for r in range(batch):
            indicator[r, rng.permutation(total)[:m]] = 1.0
        g = indicator @ K
        s_aa = np.einsum("ij,ij->i", g, indicator)
        perm_stats = stat(s_aa, g.sum(axis=1))
        exceed += int(np.count_nonzero(perm_stats >= observed))
        done += batch
    p = (1 + exceed) / (1 + permutations)
    return MmdResult(statistic=observed, p_value=p)


def knn_outlier_filter(points, groups: Sequence, k: int = 5, z: float = 2.0) -> list[int]:
    """Indices retained after dropping per-group nearest-neighbor outliers.

    A point is dropped when its mean Euclidean distance to its k nearest
    same-group neighbors strictly exceeds the group mean plus z standard
    deviations (population sd). Groups with k or fewer members are
    retained wholesale and logged.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if len(groups) != pts.shape[0]:
        raise ValueError("one group label per point required")
    if k < 1:
        raise ValueError("k must be >= 1")
    by_group: dict = {}
    for i, label in enumerate(groups):
        by_group.setdefault(label, []).append(i)
    retained: list[int] = []
    for label in sorted(by_group, key=repr):
        idx = by_group[label]
        if len(idx) <= k:
            logger.info("group %r has %d members (<= k=%d); retained wholesale",
                        label, len(idx), k)
            retained.extend(idx)
            continue
        sub = pts[idx]
        diff = sub[:, None, :] - sub[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        np.fill_diagonal(dist, np.inf)
        nearest = np.sort(dist, axis=1)[:, :k]
        means = nearest.mean(axis=1)
        cutoff = means.mean() + z * means.std()
        retained.extend(i for i, d in zip(idx, means) if d <= cutoff)
    return sorted(retained)


def cosine_cohesion(vectors, labels: Sequence) -> CohesionResult:
    """Mean pairwise cosine within same-label pairs vs across labels."""
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != len(labels):
        raise ValueError("vectors must be 2-D with one label per row")
    counts: dict = {}
    for label in labels:
        counts[label] = counts.get(label, 0) + 1
    if len(counts) < 2 or any(c < 2 for c in counts.values()):
        raise UndefinedMetricError("cohesion needs >= 2 groups of >= 2 members")
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero vector has no cosine direction")
    Vn = V / norms[:, None]
    G = Vn @ Vn.T
    labs = np.asarray([repr(l) for l in labels])
    same = labs[:, None] == labs[None, :]
    iu = np.triu_indices(len(labels), k=1)
    pair_sims = G[iu]
    pair_same = same[iu]
    return CohesionResult(
        within=float(pair_sims[pair_same].mean()),
        between=float(pair_sims[~pair_same].mean()),
    )


# ---------------------------------------------------------------------------
# Gold label sources


class GoldSource(TypingProtocol):
    def lookup(self, summary_id: str, space_id: str) -> Optional[bool]:
        """Relevance of (patient summary item id, space id), None if unknown."""


class MappingGold:
    """Gold labels from a prebuilt mapping; later duplicates win."""

    def __init__(self, mapping: Mapping[tuple[str, str], bool]):
        self._mapping = dict(mapping)

    @classmethod
    def from_labels(cls, labels: Iterable[PairLabel]) -> "MappingGold":
        return cls({(l.summary_ref.item_id(), l.space_id): l.label for l in labels})

    def lookup(self, summary_id: str, space_id: str) -> Optional[bool]:
        return self._mapping.get((summary_id, space_id))


class CheckerGold:
    """Gold labels judged live by the reasonable-consideration check.

    Verdicts are cached per pair; unparseable verdicts and unknown ids
    come back as None so the caller can exclude the query.
    """

    def __init__(self, provider: ChatProvider, summaries: Iterable[PatientSummary],
                 spaces: Iterable[TrialSpace], *, model: str = "trialmatch-default"):
        self._summaries = {s.ref.item_id(): s for s in summaries}
        self._spaces = {sp.space_id: sp for sp in spaces}
        self._provider = provider
        self._model = model
        self._cache: dict[tuple[str, str], Optional[bool]] = {}

    def lookup(self, summary_id: str, space_id: str) -> Optional[bool]:
        key = (summary_id, space_id)
        if key not in self._cache:
            summary = self._summaries.get(summary_id)
            space = self._spaces.get(space_id)
            if summary is None or space is None:
                self._cache[key] = None
            else:
                try:
                    verdict = check_reasonable(summary, space, self._provider,
                                               model=self._model)
                    self._cache[key] = verdict.value
                except DecisionParseError:
                    logger.warning("gold verdict unparseable for %s / %s",
                                   summary_id, space_id)
                    self._cache[key] = None
        return self._cache[key]


# ---------------------------------------------------------------------------
# Protocol runs


def run_protocol(corpus: Corpus, engine: MatchEngine, protocol: Protocol,
                 gold: GoldSource, *, threshold: Optional[float] = None) -> ProtocolResult:
    """Evaluate one cascade direction with and without checker filtering.

    Patient-centric queries are the corpus test-split summaries; the
    trial-centric protocol queries every space against summaries from all
    splits. Queries missing any gold label are excluded and enumerated.
    Result-count stats cover every evaluated query, including those where
    no candidate survived the checker; precision/MAP averages skip them.
    """
    patient_centric = protocol is Protocol.PATIENT_CENTRIC_K10
    missing: list[tuple[str, str]] = []
    zero_result: list[str] = []
    zero_survivor: list[str] = []
    retrieval_rows: list[RankedJudgments] = []
    checker_rows: list[RankedJudgments] = []
    retrieval_counts: list[int] = []
    checker_counts: list[int] = []

    if patient_centric:
        queries = sorted((s for s in corpus.summaries
                          if assign_split(s.patient_id) is Split.TEST),
                         key=lambda s: s.ref.item_id())
    else:
        queries = sorted(corpus.spaces, key=lambda sp: sp.space_id)

    for query in queries:
        if patient_centric:
            query_id = query.ref.item_id()
            candidates = engine.match_patient(query, k=protocol.k, threshold=threshold)
        else:
            query_id = query.space_id
            candidates = engine.match_space(query, k=protocol.k, threshold=threshold)
        if not candidates:
            zero_result.append(query_id)
            continue

        judgments: list[bool] = []
        holes = []
        for c in candidates:
            summary_id, space_id = ((c.query_ref, c.item_ref) if patient_centric
                                    else (c.item_ref, c.query_ref))
            verdict = gold.lookup(summary_id, space_id)
            if verdict is None:
                holes.append((query_id, c.item_ref))
            else:
                judgments.append(verdict)
        if holes:
            missing.extend(holes)
            continue

        retrieval_rows.append(RankedJudgments(query_id, tuple(judgments)))
        retrieval_counts.append(len(candidates))
        survivors = tuple(j for c, j in zip(candidates, judgments) if c.passed)
        checker_counts.append(len(survivors))
        if survivors:
            checker_rows.append(RankedJudgments(query_id, survivors))
        else:
            zero_survivor.append(query_id)

    def report(variant: Variant, rows: list[RankedJudgments],
               counts: list[int]) -> EvalReport:
        if not counts:
            raise UndefinedMetricError(f"no evaluable queries for {variant.value}")
        # lower-median convention, matching the per-query count stats of
        # the matcher: always an observed count
        ordered = sorted(counts)
        median = ordered[(len(ordered) - 1) // 2]
        mean = fmean(ordered)
        return EvalReport(protocol=protocol, variant=variant,
                          precision_at_k=precision_at_k(rows),
                          map_at_k=map_at_k(rows),
                          median_results=median, mean_results=mean,
                          n_queries=len(rows))

    return ProtocolResult(
        retrieval_only=report(Variant.RETRIEVAL_ONLY, retrieval_rows, retrieval_counts),
        with_checker=report(Variant.RETRIEVAL_PLUS_CHECKER, checker_rows, checker_counts),
        missing_gold=tuple(missing),
        zero_result_queries=tuple(zero_result),
        zero_survivor_queries=tuple(zero_survivor),
    )


# ---------------------------------------------------------------------------
# Report rendering and serialization

_REPORT_SCHEMA = "trialmatch.eval_report"
_PROJECTION_EXPORT_SCHEMA = "trialmatch.projection_export"
_PROJECTION_POINTS_SCHEMA = "trialmatch.projection_points"


def render_report_table(results: Sequence[tuple[str, ProtocolResult]]) -> str:
    """Fixed-width table, one dataset per column pair, metric rows below."""
    if not results:
        raise ValueError("nothing to render")
    k = results[0][1].retrieval_only.protocol.k
    if any(r.retrieval_only.protocol.k != k for _, r in results):
        raise ValueError("mixed protocols in one table")
    columns = []
    for name, result in results:
        columns.append((f"{name} (retrieval alone)", result.retrieval_only))
        columns.append((f"{name} (retrieval + checker)", result.with_checker))
    rows = [
        (f"Precision @ {k}", [f"{r.precision_at_k:.2f}" for _, r in columns]),
        (f"MAP @ {k}", [f"{r.map_at_k:.2f}" for _, r in columns]),
        ("Median results returned per query (N)",
         [f"{r.median_results:g}" for _, r in columns]),
        ("Mean results returned per query (N)",
         [f"{round(r.mean_results, 2):g}" for _, r in columns]),
        ("Queries evaluated (n)", [str(r.n_queries) for _, r in columns]),
    ]
    label_width = max(len(label) for label, _ in rows + [("Metric", [])])
    col_widths = [max(len(header), max(len(row[1][i]) for row in rows))
                  for i, (header, _) in enumerate(columns)]
    header_cells = ["Metric".ljust(label_width)] + [
        h.ljust(w) for (h, _), w in zip(columns, col_widths)]
    lines = ["  ".join(header_cells).rstrip()]
    lines.append("  ".join("-" * len(c) for c in header_cells))
    for label, values in rows:
        cells = [label.ljust(label_width)] + [
            v.ljust(w) for v, w in zip(values, col_widths)]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def _report_dict(dataset: str, report: EvalReport) -> dict:
    return {"kind": "report", "dataset": dataset,
            "protocol": report.protocol.value, "variant": report.variant.value,
            "precision_at_k": report.precision_at_k, "map_at_k": report.map_at_k,
            "median_results": report.median_results,
            "mean_results": report.mean_results, "n_queries": report.n_queries}


def write_reports(results: Sequence[tuple[str, ProtocolResult]], path) -> int:
    """Line-delimited report file; returns the number of data lines."""
    path = Path(path)
    lines = [json.dumps({"schema": _REPORT_SCHEMA, "version": 1},
                        sort_keys=True, separators=(",", ":"))]
    for dataset, result in results:
        for report in (result.retrieval_only, result.with_checker):
            lines.append(json.dumps(_report_dict(dataset, report),
                                    sort_keys=True, separators=(",", ":")))
        lines.append(json.dumps(
            {"kind": "diagnostics", "dataset": dataset,
             "missing_gold": [list(p) for p in result.missing_gold],
             "zero_result_queries": list(result.zero_result_queries),
             "zero_survivor_queries": list(result.zero_survivor_queries)},
            sort_keys=True, separators=(",", ":")))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return len(lines) - 1


def read_reports(path) -> dict[str, ProtocolResult]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty report file")
    header = json.loads(lines[0])
    if header.get("schema") != _REPORT_SCHEMA or header.get("version") != 1:
        raise ValueError(f"{path}: not a version-1 {_REPORT_SCHEMA} file")
    reports: dict[str, dict[Variant, EvalReport]] = {}
    diagnostics: dict[str, dict] = {}
    for line in lines[1:]:
        row = json.loads(line)
        if row["kind"] == "report":
            report = EvalReport(
                protocol=Protocol(row["protocol"]), variant=Variant(row["variant"]),
                precision_at_k=row["precision_at_k"], map_at_k=row["map_at_k"],
                median_results=row["median_results"],
                mean_results=row["mean_results"], n_queries=row["n_queries"])
            reports.setdefault(row["dataset"], {})[report.variant] = report
        else:
            diagnostics[row["dataset"]] = row
    out = {}
    for dataset, pair in reports.items():
        diag = diagnostics.get(dataset, {})
        out[dataset] = ProtocolResult(
            retrieval_only=pair[Variant.RETRIEVAL_ONLY],
            with_checker=pair[Variant.RETRIEVAL_PLUS_CHECKER],
            missing_gold=tuple((q, i) for q, i in diag.get("missing_gold", [])),
            zero_result_queries=tuple(diag.get("zero_result_queries", [])),
            zero_survivor_queries=tuple(diag.get("zero_survivor_queries", [])),
        )
    return out


# ---------------------------------------------------------------------------
# Projection exchange


@dataclass(frozen=True)
class ProjectionRecord:
    """One embedded item in the projection exchange, either direction.

    Exports carry the raw vector; the external projection tool returns a
    points file with 2-D coords filled in and the vector omitted.
    """

    item_id: str
    organ: str
    source: str
    vector: tuple[float, ...] = ()
    coords: Optional[tuple[float, float]] = None


def write_projection_export(records: Sequence[ProjectionRecord], path) -> int:
    path = Path(path)
    lines = [json.dumps({"schema": _PROJECTION_EXPORT_SCHEMA, "version": 1},
                        sort_keys=True, separators=(",", ":"))]
    for rec in records:
        if not rec.vector:
            raise ValueError(f"{rec.item_id}: projection export requires a vector")
        lines.append(json.dumps(
            {"item_id": rec.item_id, "organ": rec.organ, "source": rec.source,
             "vector": list(rec.vector)}, sort_keys=True, separators=(",", ":")))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return len(lines) - 1


def read_projection_coordinates(path) -> list[ProjectionRecord]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty projection file")
    header = json.loads(lines[0])
    if header.get("schema") != _PROJECTION_POINTS_SCHEMA or header.get("version") != 1:
        raise ValueError(f"{path}: not a version-1 {_PROJECTION_POINTS_SCHEMA} file")
    out = []
    for line in lines[1:]:
        row = json.loads(line)
        x, y = row["coords"]
        out.append(ProjectionRecord(item_id=row["item_id"], organ=row["organ"],
                                    source=row["source"],
                                    coords=(float(x), float(y))))
    return out


def write_projection_points(records: Sequence[ProjectionRecord], path) -> int:
    """Inverse of read_projection_coordinates, for tests and local tooling."""
    path = Path(path)
    lines = [json.dumps({"schema": _PROJECTION_POINTS_SCHEMA, "version": 1},
                        sort_keys=True, separators=(",", ":"))]
    for rec in records:
        if rec.coords is None:
            raise ValueError(f"{rec.item_id}: points file requires coordinates")
        lines.append(json.dumps(
            {"item_id": rec.item_id, "organ": rec.organ, "source": rec.source,
             "coords": [rec.coords[0], rec.coords[1]]},
            sort_keys=True, separators=(",", ":")))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return len(lines) - 1
