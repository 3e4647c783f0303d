"""Write the integration-test fixtures: a tiny model checkpoint and a reference PNG."""

import sys
from pathlib import Path

import numpy as np
import torch

from nextstroke.model import SuggestionModel, save_checkpoint, tiny_config
from nextstroke.png_io import to_png_bytes

out_dir = Path(sys.argv[1])
out_dir.mkdir(parents=True, exist_ok=True)

torch.manual_seed(3)
save_checkpoint(out_dir / "tiny.pt", SuggestionModel(tiny_config(d_emb=32, layers=1, image_size=64)))

ys, xs = np.mgrid[0:64, 0:64] / 64
image = np.stack([0.4 + 0.2 * xs, 0.5 + 0.1 * ys, 0.6 - 0.2 * xs * ys], axis=-1)
(out_dir / "reference.png").write_bytes(to_png_bytes(image))
print(f"fixtures in {out_dir}")
