"""
Checkpoint files

A checkpoint is one self-describing file:

    AELPN-CHECKPOINT
    <YAML header: format_version, seed, model, parameters, train_config, history, metadata>
    ...
    <one raw tensor record per parameter, in header order>

The header is human-readable; parameters are stored as raw float64 records,
so loading reproduces every weight bitwise.
"""

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .config import CHECKPOINT_SCHEMA, dump_yaml, validate_document
from .data.tensors import read_tensor, write_tensor
from .errors import CheckpointError, CheckpointVersionError, ConfigError, ShapeError
from .potential import ProxModel, model_from_dict
from .training import TrainConfig, TrainHistory

logger = logging.getLogger(__name__)

MAGIC_LINE = b"AELPN-CHECKPOINT\n"
HEADER_END = b"\n...\n"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """A model plus the configuration and history that produced it"""
    model: ProxModel
    seed: int = 0
    train_config: Optional[TrainConfig] = None
    history: Optional[TrainHistory] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def header(self) -> Dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "seed": int(self.seed),
            "model": self.model.to_dict(),
            "parameters": [
                {"name": name, "shape": list(arr.shape)} for name, arr in self.model.theta.items()
            ],
            "train_config": self.train_config.to_dict() if self.train_config else None,
            "history": self.history.to_dict() if self.history else None,
            "metadata": dict(self.metadata),
        }

    def to_bytes(self) -> bytes:
        buffer = io.BytesIO()
        buffer.write(MAGIC_LINE)
        buffer.write(dump_yaml(self.header()).encode("utf-8"))
        buffer.write(b"...\n")
        for arr in self.model.theta.values():
            write_tensor(buffer, arr)
        return buffer.getvalue()

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())
        logger.info("Saved %s checkpoint to %s", self.model.kind.value, path)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        """
        Parse a checkpoint

        Raises:
            CheckpointVersionError: format_version newer than this reader
            CheckpointError: Missing magic line, bad header, or inconsistent parameters
            TensorFormatError: Malformed parameter records
        """
        if not data.startswith(MAGIC_LINE):
            raise CheckpointError("Not an aelpn checkpoint (missing AELPN-CHECKPOINT line)")
        end = data.find(HEADER_END, len(MAGIC_LINE) - 1)
        if end < 0:
            raise CheckpointError("Checkpoint header is not terminated by '...'")
        try:
            header = yaml.safe_load(data[len(MAGIC_LINE):end + 1].decode("utf-8"))
        except (yaml.YAMLError, UnicodeDecodeError) as e:
            raise CheckpointError(f"Unreadable checkpoint header: {e}") from e
        if not isinstance(header, dict):
            raise CheckpointError("Checkpoint header must be a mapping")
        version = header.get("format_version")
        if isinstance(version, int) and version > FORMAT_VERSION:
            raise CheckpointVersionError(
                f"Checkpoint format_version {version} is newer than supported ({FORMAT_VERSION})"
            )
        validate_document(header, CHECKPOINT_SCHEMA, error=CheckpointError)

        stream = io.BytesIO(data)
        stream.seek(end + len(HEADER_END))
        arrays = {}
        for entry in header["parameters"]:
            arr = read_tensor(stream)
            if list(arr.shape) != list(entry["shape"]):
                raise CheckpointError(
                    f"Parameter {entry['name']} has shape {arr.shape}, header says {entry['shape']}"
                )
            arrays[entry["name"]] = arr
        try:
            model = model_from_dict(header["model"], arrays)
            train_config = (
                TrainConfig.from_dict(header["train_config"]) if header.get("train_config") else None
            )
        except (ConfigError, ShapeError) as e:
            raise CheckpointError(f"Inconsistent checkpoint: {e}") from e
        return cls(
            model=model,
            seed=header["seed"],
            train_config=train_config,
            history=TrainHistory.from_dict(header.get("history")),
            metadata=header.get("metadata") or {},
        )

    @classmethod
    def load(cls, path) -> "Checkpoint":
        checkpoint = cls.from_bytes(Path(path).read_bytes())
        logger.debug("Loaded %s checkpoint from %s", checkpoint.model.kind.value, path)
        return checkpoint


def save_checkpoint(path, model: ProxModel, seed: int = 0, **extra) -> Checkpoint:
    checkpoint = Checkpoint(model, seed, **extra)
    checkpoint.save(path)
    return checkpoint


def load_checkpoint(path) -> Checkpoint:
    return Checkpoint.load(path)
