"""Versioned checkpoint container: config echo plus named parameter tensors."""

import os
import tempfile
from pathlib import Path

import torch

from .config import ModelConfig
from .net import SuggestionModel

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, model: SuggestionModel, step: int = 0, extra: dict | None = None) -> None:
    """Atomic write: serialize to a temp file in the target directory, then rename."""
    path = Path(path)
    payload = {
        "format_version": FORMAT_VERSION,
        "config": model.cfg.to_dict(),
        "step": int(step),
        "state_dict": model.state_dict(),
    }
    if extra:
        payload["extra"] = extra
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            torch.save(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path, expected_config: ModelConfig | None = None):
    """Load a checkpoint; returns (model, step). Validates version and config."""
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    if payload.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('format_version')!r}")
    cfg = ModelConfig.from_dict(payload["config"])
    if expected_config is not None and cfg != expected_config:
        raise CheckpointError("checkpoint config does not match the expected configuration")
    model = SuggestionModel(cfg)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, int(payload.get("step", 0))
