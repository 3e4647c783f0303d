"""Sinusoidal positional encodings and differentiable bilinear map sampling."""

import math

import torch

_BASE = 10000.0


def sinusoidal_encoding(positions: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard sine/cosine encoding of (possibly continuous) positions.

    positions: (...,) tensor. Returns (..., dim).
    """
    half = dim // 2
    freq = torch.exp(
        torch.arange(half, dtype=positions.dtype, device=positions.device) * (-math.log(_BASE) / max(half, 1))
    )
    angles = positions[..., None] * freq
    enc = torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)
    if dim % 2:
        enc = torch.cat([enc, torch.zeros_like(enc[..., :1])], dim=-1)
    return enc


def encode_3d(x: torch.Tensor, y: torch.Tensor, t: torch.Tensor, dim: int) -> torch.Tensor:
    """Three-axis positional encoding: two spatial coordinates plus a temporal index.

    Each axis receives an equal sinusoidal chunk; the concatenation is
    truncated to ``dim``.
    """
    d_axis = -(-dim // 3)  # ceil
    d_axis += d_axis % 2
    parts = [sinusoidal_encoding(p, d_axis) for p in (x, y, t)]
    return torch.cat(parts, dim=-1)[..., :dim]


def encode_1d(length: int, dim: int, dtype=torch.float32, device=None) -> torch.Tensor:
    positions = torch.arange(length, dtype=dtype, device=device)
    return sinusoidal_encoding(positions, dim)


def bilinear_sample(maps: torch.Tensor, coords: torch.Tensor) -> torch.Tensor:
    """Bilinearly sample feature maps at normalized coordinates.

    maps: (B, C, H, W); coords: (B, K, 2) with (x, y) in [0, 1] mapping onto
    the pixel-center grid (0 -> first center, 1 -> last center). Coordinates
    are clamped to the grid, keeping gradients defined everywhere. Returns
    (B, K, C), differentiable in both arguments.
    """
    b, c, h, w = maps.shape
    u = (coords[..., 0] * (w - 1)).clamp(0.0, float(w - 1))
    v = (coords[..., 1] * (h - 1)).clamp(0.0, float(h - 1))
    u0 = u.floor().clamp(0, max(w - 2, 0))
    v0 = v.floor().clamp(0, max(h - 2, 0))
    fu = (u - u0).unsqueeze(-1)
    fv = (v - v0).unsqueeze(-1)
    # non-finite coordinates must surface as NaN outputs, not as crashes: keep
    # the NaN in the interpolation weights but sanitize the gather indices
    u0l = torch.nan_to_num(u0, nan=0.0).long()
    v0l = torch.nan_to_num(v0, nan=0.0).long()
    u1l = (u0l + 1).clamp(max=w - 1)
    v1l = (v0l + 1).clamp(max=h - 1)

    flat = maps.permute(0, 2, 3, 1).reshape(b, h * w, c)

    def gather(iy, ix):
        idx = (iy * w + ix).unsqueeze(-1).expand(-1, -1, c)
        return flat.gather(1, idx)

    g00 = gather(v0l, u0l)
    g01 = gather(v0l, u1l)
    g10 = gather(v1l, u0l)
    g11 = gather(v1l, u1l)
    top = g00 * (1.0 - fu) + g01 * fu
    bot = g10 * (1.0 - fu) + g11 * fu
    return top * (1.0 - fv) + bot * fv
