"""
Checkpoint Module
Versioned JSON persistence of the complete training state
"""

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Any, Dict

from config import TrainConfig
from src.core.backbone import BackboneParams
from src.core.dataset import NormalizationStats
from src.core.forest import ForestModel
from src.core.selfpaced import SelectionState
from src.errors import CheckpointFormatError, SPDRFError
from src.utils.io_utils import atomic_write

FORMAT_VERSION = 1

# Canonical key order of the checkpoint document
FIELD_ORDER = ('format_version', 'train_config', 'normalization', 'backbone',
               'forest', 'selection', 'step', 'rng_state')


def _canonical(data: Any) -> str:
    return json.dumps(data, separators=(",", ":"))


def parameter_digest(backbone: BackboneParams, forest: ForestModel) -> str:
    """SHA-256 over the canonical encoding of all trainable parameters"""
    payload = _canonical({'backbone': backbone.to_dict(), 'forest': forest.to_dict()})
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class Checkpoint:
    """Everything needed to evaluate or resume a run"""
    train_config: TrainConfig
    normalization: NormalizationStats
    backbone: BackboneParams
    forest: ForestModel
    selection: SelectionState
    step: int
    rng_state: Dict[str, Any]
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> Dict[str, Any]:
        values = {
            'format_version': self.format_version,
            'train_config': self.train_config.to_dict(),
            'normalization': self.normalization.to_dict(),
            'backbone': self.backbone.to_dict(),
            'forest': self.forest.to_dict(),
            'selection': self.selection.to_dict(),
            'step': int(self.step),
            'rng_state': self.rng_state,
        }
        return {key: values[key] for key in FIELD_ORDER}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Checkpoint':
        if not isinstance(data, dict):
            raise CheckpointFormatError("Checkpoint document must be a JSON object")
        version = data.get('format_version')
        if version != FORMAT_VERSION:
            raise CheckpointFormatError(
                f"Unsupported checkpoint format_version {version!r} (expected {FORMAT_VERSION})"
            )
        try:
            return cls(
                train_config=TrainConfig.from_dict(data['train_config']),
                normalization=NormalizationStats.from_dict(data['normalization']),
                backbone=BackboneParams.from_dict(data['backbone']),
                forest=ForestModel.from_dict(data['forest']),
                selection=SelectionState.from_dict(data['selection']),
                step=int(data['step']),
                rng_state=data['rng_state'],
            )
        except KeyError as e:
            raise CheckpointFormatError(f"Checkpoint is missing field {e}")
        except (TypeError, ValueError) as e:
            raise CheckpointFormatError(f"Malformed checkpoint: {e}")

    def to_json(self) -> str:
        return _canonical(self.to_dict()) + "\n"

    def digest(self) -> str:
        return parameter_digest(self.backbone, self.forest)


def save_checkpoint(checkpoint: Checkpoint, path: str):
    """Write a checkpoint atomically"""
    with atomic_write(path) as fh:
        fh.write(checkpoint.to_json())


def load_checkpoint(path: str) -> Checkpoint:
    """Read a checkpoint, failing loudly on format-version mismatch"""
    if not os.path.exists(path):
        raise FileNotFoundError(f"File not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise CheckpointFormatError(f"Checkpoint {path} is not valid JSON: {e}")
    try:
        return Checkpoint.from_dict(data)
    except CheckpointFormatError:
        raise
    except SPDRFError as e:
        raise CheckpointFormatError(f"Checkpoint {path} is inconsistent: {e}")
