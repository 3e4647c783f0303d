"""PNG import/export for canvases. Values are quantized to 8 bit on export only."""

import io

import numpy as np
from PIL import Image

from .strokes import Canvas


def to_png_bytes(pixels: np.ndarray) -> bytes:
    arr = np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    img = Image.fromarray(arr, mode="RGB" if arr.ndim == 3 else "L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def from_png_bytes(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    img = img.convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def save_canvas(canvas: Canvas, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_png_bytes(canvas.pixels))


def load_image(path, size=None) -> np.ndarray:
    """Load an image file as an H x W x 3 float array in [0, 1], optionally resized."""
    img = Image.open(path).convert("RGB")
    if size is not None:
        img = img.resize((size, size), Image.BILINEAR)
    return np.asarray(img, dtype=np.float64) / 255.0


def resize_image(pixels: np.ndarray, size: int) -> np.ndarray:
    arr = np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    img = Image.fromarray(arr, mode="RGB").resize((size, size), Image.BILINEAR)
    return np.asarray(img, dtype=np.float64) / 255.0
