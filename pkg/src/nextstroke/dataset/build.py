"""Dataset construction: decompose + reorder every image, write records and a manifest."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .. import png_io
from ..render import render_sequence
from ..strokes import Canvas, StrokeSequence
from .decompose import assign_subjects, decompose_image
from .reorder import ReorderWeights, build_precedence, reorder_sequence
from .schedule import DecompositionSchedule

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def manifest_checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _image_rng(seed: int, image_id: str) -> np.random.Generator:
    h = hashlib.blake2b(image_id.encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng([seed, int.from_bytes(h, "little")])


def render_checksum_for(seq: StrokeSequence, resolution: int) -> str:
    canvas = render_sequence(Canvas.blank(resolution, resolution), seq)
    return canvas.checksum()


@dataclass
class DatasetRecord:
    id: str
    image_path: Path
    strokes: StrokeSequence
    split: str
    render_checksum: str

    @property
    def T(self) -> int:
        return len(self.strokes)


def write_record(path, record_id: str, seq: StrokeSequence, checksum: str) -> None:
    payload = {
        "id": record_id,
        "T": len(seq),
        "strokes": [[float(v) for v in row] for row in seq.params],
        "subject_ids": [int(v) for v in (seq.subject_ids if seq.subject_ids is not None else np.zeros(len(seq), dtype=np.int64))],
        "render_checksum": checksum,
    }
    Path(path).write_text(_canonical_json(payload))


def read_record(path) -> tuple[str, StrokeSequence, str]:
    data = json.loads(Path(path).read_text())
    seq = StrokeSequence(np.asarray(data["strokes"], dtype=np.float64), np.asarray(data["subject_ids"], dtype=np.int64))
    return data["id"], seq, data["render_checksum"]


def _load_mask(path, resolution: int) -> np.ndarray:
    img = Image.open(path)
    if img.mode not in ("I", "I;16", "L", "P"):
        img = img.convert("L")
    img = img.resize((resolution, resolution), Image.NEAREST)
    return np.asarray(img).astype(np.int64)


def split_ids(ids, split_ratio: float, seed: int) -> dict:
    """Deterministic train/eval split; the eval side gets at least one id when possible."""
    ids = sorted(ids)
    n = len(ids)
    order = np.random.default_rng(seed).permutation(n)
    n_eval = max(1, int(np.floor(n * (1.0 - split_ratio))))
    if n_eval >= n:
        n_eval = n - 1
    eval_set = {ids[i] for i in order[:n_eval]}
    return {i: ("eval" if i in eval_set else "train") for i in ids}


def build_dataset(
    image_dir,
    mask_dir,
    out_dir,
    schedule: DecompositionSchedule | None = None,
    weights: ReorderWeights | None = None,
    split_ratio: float = 0.95,
    seed: int = 0,
    workers: int = 1,
    resolution: int = 256,
    sop_budget: int = 4000,
) -> Path:
    """Build a dataset directory from aligned image/mask folders; returns the manifest path.

    Images without a matching mask are skipped with a warning. The whole run
    is deterministic for a fixed seed.
    """
    schedule = schedule or DecompositionSchedule()
    weights = weights or ReorderWeights()
    image_dir, mask_dir, out_dir = Path(image_dir), Path(mask_dir), Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "strokes").mkdir(parents=True, exist_ok=True)

    images = sorted(p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    jobs = []
    for img_path in images:
        mask_path = None
        for ext in IMAGE_EXTENSIONS:
            cand = mask_dir / (img_path.stem + ext)
            if cand.exists():
                mask_path = cand
                break
        if mask_path is None:
            log.warning("no mask for image %s; record skipped", img_path.name)
            continue
        jobs.append((img_path.stem, img_path, mask_path))

    def process(job):
        image_id, img_path, mask_path = job
        image = png_io.load_image(img_path, size=resolution)
        mask = _load_mask(mask_path, resolution)
        rng = _image_rng(seed, image_id)
        seq = assign_subjects(decompose_image(image, schedule, rng), mask)
        # raster must match the render grid for the checksum invariance to be bit-exact
        graph = build_precedence(seq, raster=resolution)
        perm = reorder_sequence(seq, mask, weights, budget=sop_budget, rng=rng, precedence=graph)
        reordered = seq.permuted(perm)
        checksum = render_checksum_for(reordered, resolution)
        png_io.save_canvas(Canvas(image), out_dir / "images" / f"{image_id}.png")
        write_record(out_dir / "strokes" / f"{image_id}.json", image_id, reordered, checksum)
        return image_id, len(reordered), checksum

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(process, jobs))
    else:
        results = [process(j) for j in jobs]

    splits = split_ids([r[0] for r in results], split_ratio, seed)
    manifest = {
        "format_version": 1,
        "seed": seed,
        "resolution": resolution,
        "split_ratio": split_ratio,
        "schedule": schedule.to_dict(),
        "weights": weights.to_dict(),
        "records": [
            {
                "id": image_id,
                "image": f"images/{image_id}.png",
                "strokes_file": f"strokes/{image_id}.json",
                "T": t,
                "split": splits[image_id],
                "render_checksum": checksum,
            }
            for image_id, t, checksum in sorted(results)
        ],
    }
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text(_canonical_json(manifest))
    return manifest_path


class StrokeDataset:
    """Read-side view over a built dataset directory."""

    def __init__(self, manifest_path):
        self.manifest_path = Path(manifest_path)
        self.root = self.manifest_path.parent
        self.manifest = json.loads(self.manifest_path.read_text())
        self.resolution = int(self.manifest["resolution"])
        self.records = []
        for entry in self.manifest["records"]:
            rec_id, seq, checksum = read_record(self.root / entry["strokes_file"])
            self.records.append(
                DatasetRecord(
                    id=rec_id,
                    image_path=self.root / entry["image"],
                    strokes=seq,
                    split=entry["split"],
                    render_checksum=checksum,
                )
            )
        self._image_cache = {}

    @property
    def train_records(self):
        return [r for r in self.records if r.split == "train"]

    @property
    def eval_records(self):
        return [r for r in self.records if r.split == "eval"]

    def load_image(self, record: DatasetRecord, size: int) -> np.ndarray:
        key = (record.id, size)
        if key not in self._image_cache:
            self._image_cache[key] = png_io.load_image(record.image_path, size=size)
        return self._image_cache[key]

    def verify_record(self, record: DatasetRecord) -> bool:
        return render_checksum_for(record.strokes, self.resolution) == record.render_checksum

    def checksum(self) -> str:
        return manifest_checksum(self.manifest_path)
