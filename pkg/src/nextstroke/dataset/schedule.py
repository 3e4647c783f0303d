"""Progressive decomposition schedule: how many grid regions and strokes per pass."""

import math
from dataclasses import dataclass, field

DEFAULT_GRID_SIZES = (4, 9, 16, 25)
DEFAULT_STROKES_PER_REGION = (30, 20, 15, 10)
DEFAULT_SIGMA_MAX = 0.4


@dataclass(frozen=True)
class DecompositionSchedule:
    """Per-pass region counts and per-region stroke budgets, plus the size clamp.

    The default runs four passes over 4/9/16/25 grid regions with 30/20/15/10
    strokes each, 790 strokes total, with sigma clamped at 0.4.
    """

    grid_sizes: tuple = DEFAULT_GRID_SIZES
    strokes_per_region: tuple = DEFAULT_STROKES_PER_REGION
    sigma_max: float = DEFAULT_SIGMA_MAX

    def __post_init__(self):
        if len(self.grid_sizes) != len(self.strokes_per_region):
            raise ValueError("grid_sizes and strokes_per_region must have equal length")
        for g in self.grid_sizes:
            side = math.isqrt(int(g))
            if side * side != g:
                raise ValueError(f"grid size {g} is not a perfect square")
        if self.sigma_max <= 0.0 or self.sigma_max > 1.0:
            raise ValueError("sigma_max must lie in (0, 1]")

    @property
    def total_strokes(self) -> int:
        return int(sum(g * s for g, s in zip(self.grid_sizes, self.strokes_per_region)))

    def to_dict(self):
        return {
            "grid_sizes": list(self.grid_sizes),
            "strokes_per_region": list(self.strokes_per_region),
            "sigma_max": self.sigma_max,
        }

    @classmethod
    def from_dict(cls, d) -> "DecompositionSchedule":
        return cls(
            grid_sizes=tuple(d["grid_sizes"]),
            strokes_per_region=tuple(d["strokes_per_region"]),
            sigma_max=float(d["sigma_max"]),
        )


# small schedule for tests and desk-scale runs
MINI_SCHEDULE = DecompositionSchedule(grid_sizes=(1, 4), strokes_per_region=(8, 6))

NAMED_SCHEDULES = {
    "default": DecompositionSchedule(),
    "mini": MINI_SCHEDULE,
}
