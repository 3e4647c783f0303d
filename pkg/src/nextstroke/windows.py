"""Training/eval windows: a context snapshot plus (optionally) the next k strokes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .render import render_sequence
from .strokes import Canvas, StrokeSequence


@dataclass
class Window:
    """Conditioning triple (reference image, canvas, last k strokes) and targets.

    ``valid`` flags real context strokes; histories shorter than k are padded
    at the front with all-zero strokes and valid=0.
    """

    i_ref: np.ndarray  # (H, W, 3)
    i_c: np.ndarray  # (H, W, 3)
    s_c: np.ndarray  # (k, 8)
    valid: np.ndarray  # (k,)
    s_t: np.ndarray | None = None  # (k, 8)
    record_id: str = ""
    t: int = -1


def context_window(i_ref: np.ndarray, history: np.ndarray, k: int, i_c: np.ndarray | None = None) -> Window:
    """Build an inference window from a full stroke history, padding below k strokes."""
    history = np.asarray(history, dtype=np.float64).reshape(-1, 8)
    if i_c is None:
        i_c = render_sequence(Canvas.blank(i_ref.shape[0], i_ref.shape[1]), StrokeSequence(history)).pixels
    n = min(k, history.shape[0])
    s_c = np.zeros((k, 8), dtype=np.float64)
    valid = np.zeros(k, dtype=np.float64)
    if n:
        s_c[k - n :] = history[history.shape[0] - n :]
        valid[k - n :] = 1.0
    return Window(i_ref=i_ref, i_c=i_c, s_c=s_c, valid=valid, t=history.shape[0])


def feasible_split_indices(T: int, k: int) -> range:
    """Valid split points t (number of already-painted strokes): k <= t <= T - k."""
    return range(k, T - k + 1)


def _image_tensor(img: np.ndarray, dtype) -> torch.Tensor:
    return torch.as_tensor(np.ascontiguousarray(img.transpose(2, 0, 1)), dtype=dtype)


def batch_tensors(windows, dtype=torch.float32) -> dict:
    """Stack windows into model-ready tensors (targets included when present on all)."""
    batch = {
        "i_ref": torch.stack([_image_tensor(w.i_ref, dtype) for w in windows]),
        "i_c": torch.stack([_image_tensor(w.i_c, dtype) for w in windows]),
        "s_c": torch.stack([torch.as_tensor(w.s_c, dtype=dtype) for w in windows]),
        "valid": torch.stack([torch.as_tensor(w.valid, dtype=dtype) for w in windows]),
    }
    if all(w.s_t is not None for w in windows):
        batch["s_t"] = torch.stack([torch.as_tensor(w.s_t, dtype=dtype) for w in windows])
    return batch
