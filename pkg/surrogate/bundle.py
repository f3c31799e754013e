"""
Frozen-weight bundle: one DenseNet JSON file per component, an
embeddings file, and a manifest carrying the PipelineConfig and a
SHA-256 content hash over every referenced file.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from models import PipelineConfig
from models.errors import MissingCheckpointError, RejectedInputError
from numerics import DenseNetDocument, decode_blob, encode_blob
from .pipeline import SurrogateWeights

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
EMBEDDINGS_NAME = "embeddings.json"


class EmbeddingsDocument(BaseModel):
    format_version: Literal[1] = 1
    tokens: int
    hidden: int
    positions: str = Field(description="T x d position table, base64 little-endian float64")
    instruction: str = Field(description="q, base64 little-endian float64")


class BundleManifest(BaseModel):
    format_version: Literal[1] = 1
    pipeline: PipelineConfig
    files: List[str] = Field(description="Component files in hash order")
    content_hash: str
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Seed, config hash, loss history")


def _hash_files(directory: Path, files: List[str]) -> str:
    digest = hashlib.sha256()
    for name in files:
        digest.update(name.encode())
        digest.update((directory / name).read_bytes())
    return digest.hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def save_bundle(directory: Path, weights: SurrogateWeights, metadata: Optional[Dict[str, Any]] = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    files = []
    for net in weights.nets():
        name = f"{net.name}.json"
        _write_json(directory / name, DenseNetDocument.from_net(net).model_dump(mode='json'))
        files.append(name)
    embeddings = EmbeddingsDocument(
        tokens=weights.config.tokens, hidden=weights.config.hidden,
        positions=encode_blob(weights.positions), instruction=encode_blob(weights.instruction),
    )
    _write_json(directory / EMBEDDINGS_NAME, embeddings.model_dump(mode='json'))
    files.append(EMBEDDINGS_NAME)

    manifest = BundleManifest(pipeline=weights.config, files=files,
                              content_hash=_hash_files(directory, files), metadata=metadata or {})
    path = directory / MANIFEST_NAME
    _write_json(path, manifest.model_dump(mode='json'))
    logger.info(f"💾 Frozen surrogate written to {directory} (hash {manifest.content_hash[:12]})")
    return path


def read_manifest(directory: Path) -> BundleManifest:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise MissingCheckpointError(f"No frozen surrogate bundle at {directory}; run the clone mode first")
    with open(path) as f:
        return BundleManifest.model_validate(json.load(f))


def load_bundle(directory: Path) -> SurrogateWeights:
    """Load and verify a bundle; the returned weights are frozen."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    missing = [name for name in manifest.files if not (directory / name).exists()]
    if missing:
        raise MissingCheckpointError(f"Bundle at {directory} is missing {missing}")
    actual = _hash_files(directory, manifest.files)
    if actual != manifest.content_hash:
        raise RejectedInputError(f"Bundle hash mismatch at {directory}: {actual[:12]} != {manifest.content_hash[:12]}")

    config = manifest.pipeline
    nets = {}
    for name in manifest.files:
        if name == EMBEDDINGS_NAME:
            continue
        with open(directory / name) as f:
            net = DenseNetDocument.model_validate(json.load(f)).to_net()
        nets[net.name] = net
    with open(directory / EMBEDDINGS_NAME) as f:
        emb = EmbeddingsDocument.model_validate(json.load(f))
    if (emb.tokens, emb.hidden) != (config.tokens, config.hidden):
        raise RejectedInputError("Embeddings do not match the manifest pipeline config")

    try:
        weights = SurrogateWeights(
            config=config,
            encoder=nets["encoder"],
            positions=decode_blob(emb.positions, (config.tokens, config.hidden)),
            instruction=decode_blob(emb.instruction, (config.hidden,)),
            backbone=[nets[f"backbone.{i + 1}"] for i in range(config.depth)],
            head=nets["head"],
            readout=nets["readout"],
        )
    except KeyError as e:
        raise RejectedInputError(f"Bundle at {directory} lacks component {e}") from e
    return weights.freeze()
