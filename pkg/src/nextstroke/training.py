"""Training loop: window sampling, AdamW with cosine decay, logging and checkpoints."""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .dataset.build import DatasetRecord, StrokeDataset
from .model import SuggestionModel, save_checkpoint
from .objectives import DiagonalGaussian, FeatureConfig, LossWeights, total_objective
from .render import render_sequence
from .strokes import Canvas
from .windows import Window, batch_tensors, feasible_split_indices


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    base_lr: float = 1e-4
    weight_decay: float = 1e-2
    betas: tuple = (0.9, 0.999)
    clip_norm: float = 1.0
    seed: int = 0
    checkpoint_every: int = 0  # steps; 0 = only at the end
    cache_size: int = 256

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


class CanvasCache:
    """LRU cache of rendered stroke-prefix canvases keyed by (record id, t, size)."""

    def __init__(self, max_entries: int = 256):
        self.max_entries = max_entries
        self._store: OrderedDict = OrderedDict()

    def prefix_canvas(self, record: DatasetRecord, t: int, size: int) -> np.ndarray:
        key = (record.id, t, size)
        if key in self._store:
            self._store.move_to_end(key)
            return self._store[key]
        canvas = render_sequence(Canvas.blank(size, size), record.strokes.slice(0, t)).pixels
        self._store[key] = canvas
        if len(self._store) > self.max_entries:
            self._store.popitem(last=False)
        return canvas


def sample_window(
    record: DatasetRecord,
    image: np.ndarray,
    k: int,
    rng: np.random.Generator,
    cache: CanvasCache | None = None,
) -> Window | None:
    """Uniformly pick a split point t in [k, T-k] and assemble the window.

    Returns None for records too short to split (T < 2k).
    """
    T = len(record.strokes)
    ts = feasible_split_indices(T, k)
    if len(ts) == 0:
        return None
    t = int(rng.integers(ts.start, ts.stop))
    size = image.shape[0]
    i_c = cache.prefix_canvas(record, t, size) if cache else render_sequence(
        Canvas.blank(size, size), record.strokes.slice(0, t)
    ).pixels
    params = record.strokes.params
    return Window(
        i_ref=image,
        i_c=i_c,
        s_c=params[t - k : t],
        valid=np.ones(k, dtype=np.float64),
        s_t=params[t : t + k],
        record_id=record.id,
        t=t,
    )


def cosine_lr(step: int, total_steps: int, base_lr: float) -> float:
    """Cosine decay from base_lr at step 0 to 0 at total_steps."""
    frac = min(max(step / max(total_steps, 1), 0.0), 1.0)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * frac))


def train(
    model: SuggestionModel,
    dataset: StrokeDataset,
    cfg: TrainConfig,
    weights: LossWeights | None = None,
    feature_cfg: FeatureConfig | None = None,
    data_gaussian: DiagonalGaussian | None = None,
    out_dir=None,
    start_step: int = 0,
    max_steps: int | None = None,
):
    """Run the optimization; returns the per-step metric log as a list of dicts.

    Fully deterministic for a fixed seed. A non-finite loss aborts with a
    diagnostic dump of the offending batch.
    """
    weights = weights or LossWeights()
    feature_cfg = feature_cfg or FeatureConfig(include_sigma_omega=False)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    cache = CanvasCache(cfg.cache_size)

    records = [r for r in dataset.train_records if len(feasible_split_indices(len(r.strokes), model.cfg.k)) > 0]
    if not records:
        raise ValueError("no training records long enough for the configured window length")
    steps_per_epoch = math.ceil(len(records) / cfg.batch_size)
    # the LR schedule always spans the full configured horizon; max_steps only
    # caps how many of those steps this call executes
    schedule_steps = cfg.epochs * steps_per_epoch
    total_steps = schedule_steps
    if max_steps is not None:
        total_steps = min(total_steps, start_step + max_steps)

    out_dir = Path(out_dir) if out_dir is not None else None
    log_fh = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_fh = open(out_dir / "metrics.jsonl", "a")

    optimizer = torch.optim.AdamW(
        model.parameters(), lr=cfg.base_lr, betas=cfg.betas, weight_decay=cfg.weight_decay
    )
    model.train()
    history = []
    step = start_step
    try:
        while step < total_steps:
            order = rng.permutation(len(records))
            for chunk_start in range(0, steps_per_epoch * cfg.batch_size, cfg.batch_size):
                if step >= total_steps:
                    break
                # wrap around the epoch order so every batch is full even when
                # there are fewer records than batch slots (single-image overfit)
                idx = [int(order[(chunk_start + j) % len(order)]) for j in range(cfg.batch_size)]
                windows = []
                for i in idx:
                    record = records[i]
                    w = sample_window(record, dataset.load_image(record, model.cfg.image_size), model.cfg.k, rng, cache)
                    if w is not None:
                        windows.append(w)
                batch = batch_tensors(windows)

                lr = cosine_lr(step, schedule_steps, cfg.base_lr)
                for group in optimizer.param_groups:
                    group["lr"] = lr

                optimizer.zero_grad()
                total, breakdown = total_objective(model, batch, weights, feature_cfg, data_gaussian)
                if not math.isfinite(breakdown["total"]):
                    dump = None
                    if out_dir is not None:
                        dump = out_dir / f"diverged_step{step}.npz"
                        np.savez(
                            dump,
                            s_c=batch["s_c"].numpy(),
                            s_t=batch["s_t"].numpy(),
                            records=[w.record_id for w in windows],
                            ts=[w.t for w in windows],
                        )
                    raise TrainingDiverged(f"non-finite loss at step {step}" + (f"; batch dumped to {dump}" if dump else ""))
                total.backward()
                if cfg.clip_norm > 0:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
                optimizer.step()

                row = {"step": step, "lr": lr, **breakdown}
                history.append(row)
                if log_fh is not None:
                    log_fh.write(json.dumps(row) + "\n")
                step += 1
                if out_dir is not None and cfg.checkpoint_every > 0 and step % cfg.checkpoint_every == 0:
                    save_checkpoint(out_dir / f"checkpoint_step{step}.pt", model, step)
    finally:
        if log_fh is not None:
            log_fh.close()
    if out_dir is not None:
        save_checkpoint(out_dir / "checkpoint_last.pt", model, step)
    model.eval()
    return history
