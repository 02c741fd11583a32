"""Command line front end for the three trainers and the serving shim."""

import logging
from pathlib import Path

import click

from trialtrain import __version__
from trialtrain.checker import train_checker
from trialtrain.config import ConfigError, TrainConfig
from trialtrain.embedding import train_embedding
from trialtrain.serve import serve_artifact
from trialtrain.tagger import train_tagger


def _common(fn):
    fn = click.option("--base-model", default="hash-bag-128",
                      show_default=True)(fn)
    fn = click.option("--batch-size", default=16, show_default=True)(fn)
    fn = click.option("--epochs", default=20, show_default=True)(fn)
    fn = click.option("--learning-rate", default=0.05, show_default=True)(fn)
    fn = click.option("--seed", default=0, show_default=True)(fn)
    fn = click.option("--out", "output_dir", type=click.Path(path_type=Path),
                      required=True)(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Train and serve matching-engine model artifacts."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


def _run(builder, **kwargs):
    try:
        config = TrainConfig(**kwargs)
        artifact = builder(config)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {artifact.manifest['kind']} artifact -> "
               f"{artifact.path}")


@main.command("train-embedding")
@click.option("--ranking", "ranking_file", type=click.Path(path_type=Path))
@click.option("--contrastive", "contrastive_file",
              type=click.Path(path_type=Path))
@click.option("--ranking-weight", default=1.0, show_default=True)
@click.option("--contrastive-weight", default=1.0, show_default=True)
@click.option("--margin", default=0.5, show_default=True)
@_common
def train_embedding_cmd(**kwargs):
    """Fine-tune the bi-encoder on ranking and contrastive pairs."""
    _run(train_embedding, **kwargs)


@main.command("train-checker")
@click.option("--data", "checker_file", type=click.Path(path_type=Path),
              required=True)
@_common
def train_checker_cmd(**kwargs):
    """Train the (summary, space) pair classifier."""
    _run(train_checker, **kwargs)


@main.command("train-tagger")
@click.option("--data", "tagger_file", type=click.Path(path_type=Path),
              required=True)
@_common
def train_tagger_cmd(**kwargs):
    """Train the multitask sentence tagger."""
    _run(train_tagger, **kwargs)


@main.command()
@click.option("--artifact", "artifact_dir", type=click.Path(path_type=Path),
              required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8790, show_default=True)
def serve(artifact_dir, host, port):
    """Serve one artifact behind its provider HTTP contract."""
    try:
        serve_artifact(artifact_dir, host, port)
    except ConfigError as exc:
        raise click.ClickException(str(exc))


if __name__ == "__main__":
    main()
