"""Artifact directories: manifest.json + weights.pt, loadable for serving."""

import hashlib
import json
from pathlib import Path

import torch

from trialtrain.config import ConfigError


def trajectory_hash(losses) -> str:
    blob = json.dumps([float(x) for x in losses]).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def save_artifact(path: Path, manifest: dict, state_dict) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    torch.save(state_dict, path / "weights.pt")
    (path / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def read_manifest(path: Path | str) -> dict:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"{path} is not an artifact directory "
                          "(no manifest.json)")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format_version") != 1:
        raise ConfigError(f"{path}: unsupported artifact format "
                          f"{manifest.get('format_version')!r}")
    return manifest


def load_state(path: Path | str):
    return torch.load(Path(path) / "weights.pt", weights_only=True)


def load_artifact(path: Path | str):
    """Load any artifact directory; the manifest names its kind."""
    from trialtrain.checker import CheckerArtifact
    from trialtrain.embedding import EmbeddingArtifact
    from trialtrain.tagger import TaggerArtifact

    manifest = read_manifest(path)
    kind = manifest.get("kind")
    loaders = {"embedding": EmbeddingArtifact,
               "checker": CheckerArtifact,
               "tagger": TaggerArtifact}
    if kind not in loaders:
        raise ConfigError(f"{path}: unknown artifact kind {kind!r}")
    return loaders[kind].load(path)
