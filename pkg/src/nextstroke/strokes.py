"""Stroke domain types: parameter tuples, sequences, canvases and the brush primitive.

A stroke is eight normalized scalars laid out as
(x_x, x_y, rho_r, rho_g, rho_b, sigma_h, sigma_w, omega), everything in [0, 1].
Orientation omega encodes a counter-clockwise angle of omega * pi.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

STROKE_DIM = 8
PARAM_NAMES = ("x_x", "x_y", "rho_r", "rho_g", "rho_b", "sigma_h", "sigma_w", "omega")

X_SLICE = slice(0, 2)
RHO_SLICE = slice(2, 5)
SIGMA_SLICE = slice(5, 7)
OMEGA_INDEX = 7


class InvalidStrokeError(ValueError):
    """Stroke parameters outside [0, 1] or non-finite.

    ``fields`` lists the offending parameter names (index-prefixed when the
    error refers to a row of a sequence).
    """

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = tuple(fields)


def validate_params(params: np.ndarray) -> None:
    """Raise InvalidStrokeError unless every component is finite and in [0, 1].

    Accepts a single (8,) row or a (T, 8) array.
    """
    arr = np.asarray(params, dtype=np.float64)
    rows = arr.reshape(-1, STROKE_DIM) if arr.ndim <= 2 else None
    if rows is None or arr.shape[-1] != STROKE_DIM:
        raise InvalidStrokeError(f"expected stroke rows of {STROKE_DIM} floats, got shape {arr.shape}")
    bad = ~np.isfinite(rows) | (rows < 0.0) | (rows > 1.0)
    if bad.any():
        fields = []
        for t, j in zip(*np.nonzero(bad)):
            name = PARAM_NAMES[j] if rows.shape[0] == 1 else f"[{t}].{PARAM_NAMES[j]}"
            fields.append(name)
        raise InvalidStrokeError(f"stroke parameters out of range: {', '.join(fields)}", fields)


@dataclass(frozen=True)
class Stroke:
    """One stroke: center ``x``, color ``rho``, size ``sigma`` (height, width), orientation ``omega``."""

    x: tuple
    rho: tuple
    sigma: tuple
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([*self.x, *self.rho, *self.sigma, self.omega], dtype=np.float64)

    @classmethod
    def from_array(cls, row) -> "Stroke":
        row = np.asarray(row, dtype=np.float64)
        return cls(
            x=(float(row[0]), float(row[1])),
            rho=(float(row[2]), float(row[3]), float(row[4])),
            sigma=(float(row[5]), float(row[6])),
            omega=float(row[7]),
        )

    def validate(self) -> "Stroke":
        validate_params(self.as_array())
        return self


class StrokeSequence:
    """Ordered strokes as a (T, 8) float array, optionally with per-stroke subject ids.

    Order is painting order and is semantically meaningful: reordering
    overlapping strokes changes the rendered result.
    """

    def __init__(self, params, subject_ids=None):
        self.params = np.atleast_2d(np.asarray(params, dtype=np.float64))
        if self.params.size == 0:
            self.params = self.params.reshape(0, STROKE_DIM)
        if self.params.shape[1] != STROKE_DIM:
            raise InvalidStrokeError(f"stroke rows must have {STROKE_DIM} columns, got {self.params.shape[1]}")
        self.subject_ids = None if subject_ids is None else np.asarray(subject_ids, dtype=np.int64)
        if self.subject_ids is not None and self.subject_ids.shape != (len(self),):
            raise ValueError("subject_ids length must match stroke count")

    def __len__(self):
        return self.params.shape[0]

    def __getitem__(self, index) -> Stroke:
        return Stroke.from_array(self.params[index])

    def slice(self, start, stop) -> "StrokeSequence":
        sids = None if self.subject_ids is None else self.subject_ids[start:stop]
        return StrokeSequence(self.params[start:stop].copy(), sids)

    def permuted(self, perm) -> "StrokeSequence":
        perm = np.asarray(perm, dtype=np.int64)
        sids = None if self.subject_ids is None else self.subject_ids[perm]
        return StrokeSequence(self.params[perm].copy(), sids)

    def validate(self) -> "StrokeSequence":
        validate_params(self.params)
        return self

    @classmethod
    def empty(cls) -> "StrokeSequence":
        return cls(np.zeros((0, STROKE_DIM)))


@dataclass
class Canvas:
    """H x W x 3 image state with float intensities in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"canvas must be HxWx3, got shape {self.pixels.shape}")

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    def copy(self) -> "Canvas":
        return Canvas(self.pixels.copy())

    def checksum(self) -> str:
        return canvas_checksum(self.pixels)

    @classmethod
    def blank(cls, height, width, value=1.0) -> "Canvas":
        return cls(np.full((height, width, 3), float(value), dtype=np.float64))


def canvas_checksum(pixels: np.ndarray) -> str:
    """SHA-256 over the raw float64 buffer plus shape, hex digest."""
    arr = np.ascontiguousarray(pixels, dtype=np.float64)
    digest = hashlib.sha256()
    digest.update(np.asarray(arr.shape, dtype=np.int64).tobytes())
    digest.update(arr.tobytes())
    return digest.hexdigest()


DEFAULT_PRIMITIVE_RESOLUTION = 128
_EDGE_TEXELS = 1.5  # anti-aliasing ramp width, in texels


class BrushPrimitive:
    """Fixed grayscale alpha template for the parameter-free renderer.

    The default template is an anti-aliased oval computed from a closed-form
    radial ramp, so renders are reproducible across machines without shipping
    a binary asset.
    """

    def __init__(self, texture):
        texture = np.asarray(texture, dtype=np.float64)
        if texture.ndim != 2:
            raise ValueError("primitive texture must be a 2-D alpha map")
        if texture.min() < 0.0 or texture.max() > 1.0:
            raise ValueError("primitive texture values must lie in [0, 1]")
        self.texture = texture
        self.texture.setflags(write=False)

    @property
    def resolution(self):
        return self.texture.shape

    @classmethod
    def default_oval(cls, resolution=DEFAULT_PRIMITIVE_RESOLUTION) -> "BrushPrimitive":
        n = int(resolution)
        centers = (np.arange(n, dtype=np.float64) + 0.5) / n  # texel centers in [0, 1]
        u, v = np.meshgrid(centers, centers, indexing="xy")
        # radial coordinate of the inscribed ellipse; 1.0 on the edge
        r = np.sqrt(((u - 0.5) / 0.5) ** 2 + ((v - 0.5) / 0.5) ** 2)
        ramp = _EDGE_TEXELS * (2.0 / n)
        alpha = np.clip((1.0 - r) / ramp + 0.5, 0.0, 1.0)
        return cls(alpha)

    @classmethod
    def full_cover(cls, resolution=DEFAULT_PRIMITIVE_RESOLUTION) -> "BrushPrimitive":
        """Fully opaque square template, mostly useful in tests."""
        return cls(np.ones((resolution, resolution), dtype=np.float64))


_default_primitive = None


def default_primitive() -> BrushPrimitive:
    global _default_primitive
    if _default_primitive is None:
        _default_primitive = BrushPrimitive.default_oval()
    return _default_primitive
