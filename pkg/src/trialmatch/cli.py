"""Command-line front end: one subcommand per pipeline stage plus serve.

Match output goes through the same payload builders as the HTTP service,
so both surfaces return identical results for identical inputs. Exit
codes: 0 success, 1 pipeline error, 2 usage error.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .condenser import EmptyRecordError, condense, write_condensed_records
from .ctgov import DEFAULT_BASE_URL, RegistryClient, parse_study_payload
from .datamodel import (
    Corpus,
    Split,
    SummarySource,
    load_corpus,
    save_corpus,
)
from .errors import (
    ExtractionError,
    SummarizationError,
    TrialMatchError,
    TransportError,
)
from .evalkit import (
    CheckerGold,
    Protocol,
    render_report_table,
    run_protocol,
    write_reports,
)
from .llm import extract_trial_spaces, summarize_patient
from .service import (
    ServiceConfig,
    build_index,
    build_providers,
    build_snapshot,
    create_app,
    match_patient_payload,
    match_space_payload,
)
from .synthgen import SamplingMockProvider, SynthSpec, assemble_corpus
from .trainprep import (
    LexiconConceptLabeler,
    LlmConceptLabeler,
    build_checker_dataset,
    build_stage1_pairs,
    build_tagger_dataset,
    mine_hard_negatives,
    scan_training_file,
    write_checker_examples,
    write_contrastive_pairs,
    write_ranking_pairs,
    write_tagger_examples,
)

logger = logging.getLogger("trialmatch.cli")


@dataclass
class CliState:
    config: ServiceConfig
    seed: int


def pipeline(fn):
    """Map engine errors to exit code 1 with the module's message."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TrialMatchError as exc:
            raise click.ClickException(str(exc))
    return wrapper


@click.group()
@click.version_option(__version__, prog_name="trialmatch")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Service/pipeline config file (JSON).")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for sampling stages (trainprep, synth).")
@click.option("--mock-providers", is_flag=True,
              help="Force deterministic in-process providers; no network.")
@click.pass_context
def main(ctx, config_path, seed, mock_providers):
    """Clinical trial matching pipeline and service."""
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = ServiceConfig.load(config_path)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"bad config: {exc}")
    if mock_providers:
        config = replace(config, mock_providers=True)
    ctx.obj = CliState(config=config, seed=seed)


def _corpus_config(state: CliState, corpus_dir: str,
                   index_path: Optional[str] = None) -> ServiceConfig:
    return replace(state.config, corpus_dir=corpus_dir,
                   index_path=index_path or state.config.index_path)


def _load_or_empty(corpus_dir: Path) -> Corpus:
    if (corpus_dir / "trials.jsonl").exists():
        return load_corpus(corpus_dir)
    return Corpus()


# ---------------------------------------------------------------------------
# ingest / extract / condense / summarize / embed


@main.command("ingest-trials")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path())
@click.option("--nct", "nct_ids", multiple=True, help="NCT id; repeatable.")
@click.option("--nct-file", type=click.Path(exists=True),
              help="File with one NCT id per line; # comments allowed.")
@click.option("--cache-dir", type=click.Path(), default=None,
              help="Raw payload cache; required with --mock-providers.")
@click.option("--registry-url", default=DEFAULT_BASE_URL, show_default=True)
@click.pass_obj
@pipeline
def ingest_trials(state, corpus_dir, nct_ids, nct_file, cache_dir,
                  registry_url):
    """Fetch trial records from the registry into a corpus directory."""
    ids = list(nct_ids)
    if nct_file:
        for line in Path(nct_file).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                ids.append(line)
    if not ids:
        raise click.UsageError("no NCT ids given (--nct / --nct-file)")
    corpus_dir = Path(corpus_dir)
    corpus = _load_or_empty(corpus_dir)
    by_nct = {t.nct_id: t for t in corpus.trials}
    with RegistryClient(base_url=registry_url, cache_dir=cache_dir) as client:
        for nct_id in ids:
            if state.config.mock_providers:
                entry = client.cached_entry(nct_id)
                if entry is None:
                    raise click.ClickException(
                        f"{nct_id} is not cached and --mock-providers "
                        f"forbids network")
                by_nct[nct_id] = parse_study_payload(entry.payload)
            else:
                by_nct[nct_id] = client.fetch_trial(nct_id)
    corpus.trials = sorted(by_nct.values(), key=lambda t: t.nct_id)
    save_corpus(corpus, corpus_dir)
    click.echo(f"ingested {len(ids)} ids; corpus now has "
               f"{len(corpus.trials)} trials")


@main.command("extract-spaces")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True))
@click.option("--force", is_flag=True,
              help="Re-extract trials that already have spaces.")
@click.pass_obj
@pipeline
def extract_spaces(state, corpus_dir, force):
    """Extract clinical spaces from every trial's eligibility text."""
    corpus = load_corpus(corpus_dir)
    providers = build_providers(state.config)
    have = {s.nct_id for s in corpus.spaces}
    spaces = [] if force else list(corpus.spaces)
    extracted = skipped = 0
    for trial in corpus.trials:
        if not force and trial.nct_id in have:
            continue
        try:
            spaces.extend(extract_trial_spaces(trial, providers.chat))
            extracted += 1
        except (ExtractionError, TransportError) as exc:
            logger.warning("extraction failed for %s: %s", trial.nct_id, exc)
            skipped += 1
    corpus.spaces = spaces
    save_corpus(corpus, corpus_dir)
    click.echo(f"extracted {extracted} trials ({skipped} failed); corpus "
               f"now has {len(spaces)} spaces")


@main.command("condense")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--as-of", "as_of", type=click.DateTime(["%Y-%m-%d"]),
              default=None, help="Anchor date; default: each patient's "
              "latest document date.")
@click.pass_obj
@pipeline
def condense_cmd(state, corpus_dir, out_path, threshold, as_of):
    """Condense each patient's documents to concept-relevant sentences."""
    corpus = load_corpus(corpus_dir)
    providers = build_providers(state.config)
    by_patient: dict[str, list] = {}
    for doc in corpus.documents:
        by_patient.setdefault(doc.patient_id, []).append(doc)
    records, skipped = [], 0
    for patient_id in sorted(by_patient):
        docs = by_patient[patient_id]
        anchor = as_of.date() if as_of else max(d.date for d in docs)
        try:
            records.append(condense(docs, providers.tagger, threshold,
                                    anchor))
        except EmptyRecordError as exc:
            logger.warning("skipping %s: %s", patient_id, exc)
            skipped += 1
    write_condensed_records(records, out_path)
    click.echo(f"condensed {len(records)} patients ({skipped} empty) "
               f"-> {out_path}")


@main.command("summarize")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True))
@click.option("--condensed", "condensed_path", required=True,
              type=click.Path(exists=True))
@click.option("--source", type=click.Choice([s.value for s in SummarySource]),
              default=SummarySource.STANDARD_OF_CARE.value,
              show_default=True)
@click.pass_obj
@pipeline
def summarize_cmd(state, corpus_dir, condensed_path, source):
    """Summarize condensed records into the corpus summary file."""
    from .condenser import read_condensed_records
    corpus = load_corpus(corpus_dir)
    providers = build_providers(state.config)
    records = read_condensed_records(condensed_path)
    by_ref = {s.ref: s for s in corpus.summaries}
    written = skipped = 0
    for record in records:
        try:
            summary = summarize_patient(record, providers.chat,
                                        source=SummarySource(source))
            by_ref[summary.ref] = summary
            written += 1
        except (SummarizationError, TransportError) as exc:
            logger.warning("summary failed for %s: %s",
                           record.patient_id, exc)
            skipped += 1
    corpus.summaries = list(by_ref.values())
    save_corpus(corpus, corpus_dir)
    click.echo(f"summarized {written} patients ({skipped} failed); corpus "
               f"now has {len(corpus.summaries)} summaries")


@main.command("embed-index")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_obj
@pipeline
def embed_index(state, corpus_dir, out_path):
    """Embed summaries and spaces into a persisted exact-search index."""
    corpus = load_corpus(corpus_dir, strict=True)
    providers = build_providers(state.config)
    index = build_index(corpus, providers.embedder)
    index.save(out_path)
    click.echo(f"indexed {len(corpus.summaries)} patients and "
               f"{len(corpus.spaces)} spaces (dim {index.dimension}) "
               f"-> {out_path}")


# ---------------------------------------------------------------------------
# match


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value).replace("\t", " ").replace("\n", " ")


def _emit_tsv(rows, columns) -> None:
    for row in rows:
        click.echo("\t".join(_cell(row[c]) for c in columns))


@main.group()
def match():
    """Run one match query against a corpus (and optional saved index)."""


@match.command("patient")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True))
@click.option("--index", "index_path", type=click.Path(exists=True),
              default=None)
@click.option("--summary-file", type=click.Path(exists=True), default=None,
              help="File with free-text patient summary.")
@click.option("--patient-id", default=None)
@click.option("--k", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--as-of", "as_of", type=click.DateTime(["%Y-%m-%d"]),
              default=None)
@click.option("--show-filtered", is_flag=True)
@click.pass_obj
@pipeline
def match_patient_cmd(state, corpus_dir, index_path, summary_file,
                      patient_id, k, threshold, as_of, show_filtered):
    """Rank trial spaces for one patient; TSV on stdout.

    Columns: rank, space_id, nct_id, cosine, checker_prob, passed,
    raw_text.
    """
    if (summary_file is None) == (patient_id is None):
        raise click.UsageError(
            "exactly one of --summary-file / --patient-id")
    snapshot = build_snapshot(_corpus_config(state, corpus_dir, index_path))
    summary_text = (Path(summary_file).read_text(encoding="utf-8")
                    if summary_file else None)
    try:
        payload = match_patient_payload(
            snapshot, summary_text=summary_text, patient_id=patient_id,
            k=k if k is not None else state.config.k_patient,
            threshold=threshold,
            as_of_date=as_of.date() if as_of else None,
            show_filtered=show_filtered)
    except KeyError as exc:
        raise click.ClickException(f"unknown patient_id {exc.args[0]!r}")
    except ValueError as exc:
        raise click.UsageError(str(exc))
    _emit_tsv(payload["candidates"],
              ("rank", "space_id", "nct_id", "cosine", "checker_prob",
               "passed", "raw_text"))


@match.command("space")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True))
@click.option("--index", "index_path", type=click.Path(exists=True),
              default=None)
@click.option("--space-id", default=None)
@click.option("--space-file", type=click.Path(exists=True), default=None,
              help="File with free-text space criteria.")
@click.option("--k", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--show-filtered", is_flag=True)
@click.pass_obj
@pipeline
def match_space_cmd(state, corpus_dir, index_path, space_id, space_file,
                    k, threshold, show_filtered):
    """Rank patient summaries for one trial space; TSV on stdout.

    Columns: rank, item_id, patient_id, split, anchor_date, cosine,
    checker_prob, passed.
    """
    if (space_id is None) == (space_file is None):
        raise click.UsageError("exactly one of --space-id / --space-file")
    snapshot = build_snapshot(_corpus_config(state, corpus_dir, index_path))
    space_text = (Path(space_file).read_text(encoding="utf-8")
                  if space_file else None)
    try:
        payload = match_space_payload(
            snapshot, space_id=space_id, space_text=space_text,
            k=k if k is not None else state.config.k_space,
            threshold=threshold, show_filtered=show_filtered)
    except KeyError as exc:
        raise click.ClickException(f"unknown space_id {exc.args[0]!r}")
    except ValueError as exc:
        raise click.UsageError(str(exc))
    _emit_tsv(payload["candidates"],
              ("rank", "item_id", "patient_id", "split", "anchor_date",
               "cosine", "checker_prob", "passed"))


# ---------------------------------------------------------------------------
# trainprep / eval / synth / serve


@main.command("trainprep")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--neg-ratio", type=float, default=1.0, show_default=True)
@click.option("--tagger-sample", type=int, default=200, show_default=True)
@click.option("--rounds", type=click.IntRange(0, 2), default=1,
              show_default=True,
              help="Hard-negative mining rounds (0 = stage-1 pairs only).")
@click.pass_obj
@pipeline
def trainprep_cmd(state, corpus_dir, out_dir, neg_ratio, tagger_sample,
                  rounds):
    """Build the four training files from a labeled corpus."""
    corpus = load_corpus(corpus_dir, strict=True)
    providers = build_providers(state.config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    stage1 = build_stage1_pairs(corpus.enrollments, corpus.spaces,
                                corpus.summaries, providers.chat,
                                neg_ratio=neg_ratio, seed=state.seed)
    mined_b, mined_c = [], []
    if rounds >= 1:
        snapshot = build_snapshot(_corpus_config(state, corpus_dir),
                                  providers)
        mined_b = mine_hard_negatives(snapshot.engine, corpus.summaries,
                                      corpus.spaces, providers.chat,
                                      round_tag="b")
        if rounds >= 2:
            mined_c = mine_hard_negatives(snapshot.engine, corpus.summaries,
                                          corpus.spaces, providers.chat,
                                          round_tag="c")
    checker = build_checker_dataset(stage1, mined_b, mined_c)
    labeler = (LexiconConceptLabeler() if state.config.mock_providers
               or state.config.llm_url is None
               else LlmConceptLabeler(providers.chat))
    tagger = build_tagger_dataset(corpus.documents, labeler, tagger_sample,
                                  seed=state.seed)

    counts = {
        "ranking.jsonl": write_ranking_pairs(stage1 + mined_b + mined_c,
                                             out / "ranking.jsonl"),
        "contrastive.jsonl": write_contrastive_pairs(
            stage1 + mined_b + mined_c, out / "contrastive.jsonl"),
        "checker.jsonl": write_checker_examples(checker,
                                                out / "checker.jsonl"),
        "tagger.jsonl": write_tagger_examples(tagger, out / "tagger.jsonl"),
    }
    for name in ("ranking.jsonl", "contrastive.jsonl", "checker.jsonl"):
        scan_training_file(out / name)
    scan_training_file(out / "tagger.jsonl",
                       allowed=frozenset({Split.TRAIN, Split.VALIDATION}))
    for name, count in counts.items():
        click.echo(f"{name}: {count} records")


@main.command("eval")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True))
@click.option("--index", "index_path", type=click.Path(exists=True),
              default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--protocol", type=click.Choice(["patient_centric",
                                               "trial_centric", "both"]),
              default="both", show_default=True)
@click.option("--threshold", type=float, default=None,
              help="Checker threshold; default: config value.")
@click.option("--dataset-name", default=None,
              help="Report column label; default: corpus dir name.")
@click.pass_obj
@pipeline
def eval_cmd(state, corpus_dir, index_path, out_path, protocol, threshold,
             dataset_name):
    """Evaluate both cascade variants and write the report file."""
    name = dataset_name or Path(corpus_dir).name
    snapshot = build_snapshot(_corpus_config(state, corpus_dir, index_path))
    providers = build_providers(state.config)
    gold = CheckerGold(providers.chat, snapshot.corpus.summaries,
                       snapshot.corpus.spaces)
    wanted = {
        "patient_centric": [Protocol.PATIENT_CENTRIC_K10],
        "trial_centric": [Protocol.TRIAL_CENTRIC_K20],
        "both": [Protocol.PATIENT_CENTRIC_K10, Protocol.TRIAL_CENTRIC_K20],
    }[protocol]
    results = []
    for proto in wanted:
        result = run_protocol(snapshot.corpus, snapshot.engine, proto, gold,
                              threshold=threshold)
        results.append((f"{name}/{proto.value}", result))
        click.echo(render_report_table([(name, result)]))
        click.echo("")
    lines = write_reports(results, out_path)
    click.echo(f"wrote {lines} report lines -> {out_path}")


@main.command("synth")
@click.option("--spec", "spec_path", type=click.Path(exists=True),
              default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--n", "n_patients", type=int, default=None,
              help="Override the spec's patient count.")
@click.pass_obj
@pipeline
def synth_cmd(state, spec_path, out_dir, n_patients):
    """Generate a synthetic corpus from a generation spec."""
    if spec_path:
        spec = SynthSpec.from_file(spec_path)
        if n_patients is not None:
            spec = replace(spec, n_patients=n_patients)
    else:
        if n_patients is None:
            raise click.UsageError("need --spec or --n")
        spec = SynthSpec(n_patients=n_patients, seed=state.seed)
    if state.config.mock_providers or state.config.llm_url is None:
        provider = SamplingMockProvider(seed=spec.seed)
    else:
        from .llm import HttpChatProvider
        provider = HttpChatProvider(state.config.llm_url)
    result = assemble_corpus(spec, provider, out_dir)
    click.echo(f"generated {result.n_patients} patients "
               f"({result.n_documents} documents, {result.n_summaries} "
               f"summaries) -> {result.out_dir}")
    if result.skipped:
        click.echo(f"{len(result.skipped)} partial failures:", err=True)
        for item_id, reason in result.skipped:
            click.echo(f"  {item_id}: {reason}", err=True)


@main.command("serve")
@click.option("--host", default=None, help="Override config host.")
@click.option("--port", type=int, default=None, help="Override config port.")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True),
              default=None)
@click.option("--index", "index_path", type=click.Path(exists=True),
              default=None)
@click.pass_obj
@pipeline
def serve_cmd(state, host, port, corpus_dir, index_path):
    """Run the matching service until interrupted."""
    import uvicorn
    config = state.config
    if host:
        config = replace(config, host=host)
    if port:
        config = replace(config, port=port)
    if corpus_dir:
        config = replace(config, corpus_dir=corpus_dir)
    if index_path:
        config = replace(config, index_path=index_path)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port)


if __name__ == "__main__":
    main()
