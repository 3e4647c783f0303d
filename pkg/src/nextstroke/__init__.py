"""nextstroke: paint-stroke dataset building, next-stroke suggestion models, and serving."""

__version__ = "0.1.0"

from .strokes import (  # noqa: F401
    Canvas,
    BrushPrimitive,
    InvalidStrokeError,
    Stroke,
    StrokeSequence,
    canvas_checksum,
    default_primitive,
)
