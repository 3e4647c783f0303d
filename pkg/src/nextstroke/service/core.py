"""Session state and suggestion logic behind the HTTP API.

Each session owns a reference image, the committed stroke history and the
live canvas (always equal to replaying the history). Suggestion variants are
pinned to the context they were generated from: any commit, accept or undo
invalidates whatever is still pending.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .. import png_io
from ..metrics import EvalProtocol, heatmap as compute_heatmap, model_sampler
from ..render import render_sequence, _composite_into
from ..strokes import Canvas, InvalidStrokeError, StrokeSequence, canvas_checksum, validate_params
from ..windows import context_window


class ServiceError(Exception):
    pass


class UnknownSession(ServiceError):
    pass


class StaleVariant(ServiceError):
    pass


class ValidationFailure(ServiceError):
    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = tuple(fields)


class ModelUnavailable(ServiceError):
    pass


class UndecodableImage(ServiceError):
    pass


@dataclass
class Session:
    id: str
    i_ref: np.ndarray
    history: np.ndarray  # (N, 8)
    canvas: np.ndarray  # (H, W, 3), incrementally updated
    pending: dict = field(default_factory=dict)  # variant_id -> (k, 8) strokes
    created_at: float = field(default_factory=time.time)
    last_activity: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def touch(self):
        self.last_activity = time.time()


class SuggestionService:
    """Holds sessions and the (optional) model used to generate suggestions."""

    MAX_VARIANTS = 16

    def __init__(
        self,
        model=None,
        seed: int = 0,
        protocol: EvalProtocol | None = None,
        image_size: int | None = None,
        idle_timeout: float | None = None,
        snapshot_dir=None,
        snapshot_every: int = 25,
    ):
        self.model = model
        if model is not None:
            model.eval()
        self.image_size = image_size or (model.cfg.image_size if model is not None else 256)
        self.k = model.cfg.k if model is not None else 8
        self.protocol = protocol or EvalProtocol()
        self.generator = torch.Generator().manual_seed(seed)
        self.idle_timeout = idle_timeout
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir else None
        self.snapshot_every = snapshot_every
        self._mutations = 0
        self._sessions: dict[str, Session] = {}
        self._store_lock = threading.Lock()

    # -- session lifecycle ----------------------------------------------------

    def create_session(self, png_bytes: bytes) -> str:
        try:
            image = png_io.from_png_bytes(png_bytes)
        except Exception as exc:
            raise UndecodableImage(f"could not decode reference image: {exc}") from exc
        image = png_io.resize_image(image, self.image_size)
        session = Session(
            id=uuid.uuid4().hex,
            i_ref=image,
            history=np.zeros((0, 8), dtype=np.float64),
            canvas=np.ones((self.image_size, self.image_size, 3), dtype=np.float64),
        )
        with self._store_lock:
            self._expire_idle()
            self._sessions[session.id] = session
        return session.id

    def _expire_idle(self):
        if self.idle_timeout is None:
            return
        cutoff = time.time() - self.idle_timeout
        for sid in [s for s, sess in self._sessions.items() if sess.last_activity < cutoff]:
            del self._sessions[sid]

    def _get(self, session_id: str) -> Session:
        with self._store_lock:
            self._expire_idle()
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def session_ids(self):
        with self._store_lock:
            return list(self._sessions)

    # -- state ------------------------------------------------------------------

    def get_state(self, session_id: str):
        session = self._get(session_id)
        with session.lock:
            session.touch()
            return png_io.to_png_bytes(session.canvas), int(session.history.shape[0])

    def verify_replay(self, session_id: str) -> bool:
        """Live canvas checksum equals an offline render of the full history."""
        session = self._get(session_id)
        with session.lock:
            replayed = render_sequence(
                Canvas.blank(self.image_size, self.image_size), StrokeSequence(session.history)
            )
            return replayed.checksum() == canvas_checksum(session.canvas)

    # -- mutations ---------------------------------------------------------------

    def _commit_rows(self, session: Session, rows: np.ndarray):
        for row in rows:
            _composite_into(session.canvas, row)
        session.history = np.concatenate([session.history, rows], axis=0)
        session.pending.clear()
        self._after_mutation()

    def commit_strokes(self, session_id: str, strokes) -> None:
        session = self._get(session_id)
        rows = np.asarray(strokes, dtype=np.float64)
        if rows.size == 0:
            return  # explicit no-op: pending suggestions stay valid
        if rows.ndim != 2 or rows.shape[1] != 8:
            raise ValidationFailure(f"strokes must be a list of 8-float rows, got shape {rows.shape}")
        try:
            validate_params(rows)
        except InvalidStrokeError as exc:
            raise ValidationFailure(str(exc), exc.fields) from exc
        with session.lock:
            session.touch()
            self._commit_rows(session, rows)

    def suggest(self, session_id: str, n_variants: int):
        if self.model is None:
            raise ModelUnavailable("no model checkpoint is loaded")
        if not 1 <= int(n_variants) <= self.MAX_VARIANTS:
            raise ValidationFailure(f"n_variants must lie in [1, {self.MAX_VARIANTS}]", ("n_variants",))
        session = self._get(session_id)
        with session.lock:
            session.touch()
            window = context_window(session.i_ref, session.history, self.k, i_c=session.canvas.copy())
            sampler = model_sampler(self.model)
            preds = sampler(window, int(n_variants), self.generator)
            session.pending.clear()
            variants = []
            for strokes in preds:
                vid = uuid.uuid4().hex[:12]
                session.pending[vid] = strokes
                preview = session.canvas.copy()
                for row in strokes:
                    _composite_into(preview, row)
                variants.append(
                    {
                        "variant_id": vid,
                        "strokes": [[float(v) for v in row] for row in strokes],
                        "preview": png_io.to_png_bytes(preview),
                    }
                )
            return variants

    def accept(self, session_id: str, variant_id: str, prefix_len: int) -> None:
        session = self._get(session_id)
        with session.lock:
            session.touch()
            if variant_id not in session.pending:
                raise StaleVariant(f"variant {variant_id!r} is not pending (stale or unknown)")
            if not 1 <= int(prefix_len) <= self.k:
                raise ValidationFailure(f"prefix_len must lie in [1, {self.k}]", ("prefix_len",))
            strokes = session.pending[variant_id][: int(prefix_len)]
            self._commit_rows(session, np.asarray(strokes, dtype=np.float64))

    def undo(self, session_id: str, count: int) -> None:
        if int(count) < 0:
            raise ValidationFailure("count must be non-negative", ("count",))
        session = self._get(session_id)
        with session.lock:
            session.touch()
            keep = max(0, session.history.shape[0] - int(count))
            session.history = session.history[:keep].copy()
            session.canvas = render_sequence(
                Canvas.blank(self.image_size, self.image_size), StrokeSequence(session.history)
            ).pixels
            session.pending.clear()
            self._after_mutation()

    # -- analysis ---------------------------------------------------------------

    def heatmap_png(self, session_id: str) -> bytes:
        if self.model is None:
            raise ModelUnavailable("no model checkpoint is loaded")
        session = self._get(session_id)
        with session.lock:
            session.touch()
            window = context_window(session.i_ref, session.history, self.k, i_c=session.canvas.copy())
            probs = compute_heatmap(model_sampler(self.model), window, self.protocol, self.generator)
        return png_io.to_png_bytes(probs)

    def interpolate(self, session_id: str, steps: int):
        if self.model is None:
            raise ModelUnavailable("no model checkpoint is loaded")
        if int(steps) < 2:
            raise ValidationFailure("steps must be >= 2", ("steps",))
        session = self._get(session_id)
        with session.lock:
            session.touch()
            window = context_window(session.i_ref, session.history, self.k, i_c=session.canvas.copy())
            from ..windows import batch_tensors

            batch = batch_tensors([window])
            with torch.no_grad():
                c, f = self.model.encode_context(batch["i_ref"], batch["i_c"], batch["s_c"], batch["valid"])
                z_start = torch.randn(1, self.model.cfg.d_z, generator=self.generator)
                z_end = torch.randn(1, self.model.cfg.d_z, generator=self.generator)
                alphas = np.linspace(0.0, 1.0, int(steps))
                z = torch.cat([(1.0 - a) * z_start + a * z_end for a in alphas], dim=0).to(torch.float32)
                preds = self.model.decode(z, c.expand(len(alphas), -1, -1), f.expand(len(alphas), -1, -1, -1)).numpy()
        return [
            {"alpha": float(a), "strokes": [[float(v) for v in row] for row in pred]}
            for a, pred in zip(alphas, preds)
        ]

    # -- persistence --------------------------------------------------------------

    def _after_mutation(self):
        self._mutations += 1
        if self.snapshot_dir is not None and self._mutations % self.snapshot_every == 0:
            self.save_snapshot()

    def save_snapshot(self):
        if self.snapshot_dir is None:
            return
        self.snapshot_dir.mkdir(parents=True, exist_ok=True)
        with self._store_lock:
            sessions = list(self._sessions.values())
        for session in sessions:
            payload = {
                "id": session.id,
                "history": [[float(v) for v in row] for row in session.history],
            }
            (self.snapshot_dir / f"{session.id}.json").write_text(json.dumps(payload))
            png_io.save_canvas(Canvas(session.i_ref), self.snapshot_dir / f"{session.id}_ref.png")

    def load_snapshot(self):
        if self.snapshot_dir is None or not self.snapshot_dir.exists():
            return 0
        restored = 0
        for meta in sorted(self.snapshot_dir.glob("*.json")):
            payload = json.loads(meta.read_text())
            ref_path = self.snapshot_dir / f"{payload['id']}_ref.png"
            if not ref_path.exists():
                continue
            image = png_io.load_image(ref_path, size=self.image_size)
            history = np.asarray(payload["history"], dtype=np.float64).reshape(-1, 8)
            canvas = render_sequence(Canvas.blank(self.image_size, self.image_size), StrokeSequence(history)).pixels
            session = Session(id=payload["id"], i_ref=image, history=history, canvas=canvas)
            with self._store_lock:
                self._sessions[session.id] = session
            restored += 1
        return restored
