"""Conditional transformer VAE that proposes the next k strokes.

A context encoder fuses reference/canvas image features with the last k
strokes into a token sequence c. During training a posterior encoder maps the
target strokes (cross-attending to c) to a diagonal Gaussian over the latent
z. Decoding happens in two stages: the position decoder predicts stroke
centers from (z, c); reference features sampled at those centers then drive
the attribute decoder, which predicts color, size and orientation.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .config import ModelConfig
from .encoding import bilinear_sample, encode_1d, encode_3d


class ConfigurationError(ValueError):
    pass


class ResidualDownBlock(nn.Module):
    """Conv block with residual connection, halving spatial resolution.

    GELU keeps the whole network smooth, which the finite-difference gradient
    checks rely on.
    """

    def __init__(self, c_in, c_out):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.skip = nn.Conv2d(c_in, c_out, 1, stride=2)
        self.act = nn.GELU()

    def forward(self, x):
        h = self.conv2(self.act(self.conv1(x)))
        return self.act(h + self.skip(x))


class VisualBackbone(nn.Module):
    def __init__(self, channels):
        super().__init__()
        widths = [3, *channels]
        self.blocks = nn.Sequential(*[ResidualDownBlock(a, b) for a, b in zip(widths[:-1], widths[1:])])

    def forward(self, x):
        return self.blocks(x)


def sample_latent(mu: torch.Tensor, logvar: torch.Tensor, mode: str = "train", noise=None, generator=None):
    """Draw z: reparameterized posterior sample (train), prior sample, or the mean."""
    if mode in ("train", "posterior"):
        if noise is None:
            noise = torch.randn(mu.shape, dtype=mu.dtype, device=mu.device, generator=generator)
        return mu + torch.exp(0.5 * logvar) * noise
    if mode in ("inference", "prior"):
        if noise is None:
            noise = torch.randn(mu.shape, dtype=mu.dtype, device=mu.device, generator=generator)
        return noise
    if mode == "mean":
        return mu
    raise ValueError(f"unknown latent mode {mode!r}")


@dataclass
class ModelOutput:
    s_hat: torch.Tensor
    x_hat: torch.Tensor
    rho_hat: torch.Tensor
    sigma_hat: torch.Tensor
    omega_hat: torch.Tensor
    mu: torch.Tensor | None
    logvar: torch.Tensor | None
    z: torch.Tensor
    c: torch.Tensor
    f: torch.Tensor


class SuggestionModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_emb
        self.backbone_ref = VisualBackbone(cfg.backbone_channels)
        self.backbone_canvas = VisualBackbone(cfg.backbone_channels)
        self.feature_proj = nn.Conv2d(2 * cfg.backbone_channels[-1], d, 1)
        # context strokes carry a validity flag so short histories can be padded
        self.context_stroke_proj = nn.Linear(9, d)
        self.target_stroke_proj = nn.Linear(8, d)

        enc_layer = nn.TransformerEncoderLayer(d, cfg.n_heads, cfg.ff_dim, cfg.dropout, activation="gelu", batch_first=True)
        self.context_encoder = nn.TransformerEncoder(enc_layer, cfg.context_layers)

        def decoder(layers):
            layer = nn.TransformerDecoderLayer(d, cfg.n_heads, cfg.ff_dim, cfg.dropout, activation="gelu", batch_first=True)
            return nn.TransformerDecoder(layer, layers)

        self.posterior_decoder = decoder(cfg.posterior_layers)
        self.stat_tokens = nn.Parameter(torch.randn(2, d) * 0.02)
        self.mu_head = nn.Linear(d, cfg.d_z)
        self.logvar_head = nn.Linear(d, cfg.d_z)

        self.z_to_token = nn.Linear(cfg.d_z, d)
        self.position_decoder = decoder(cfg.position_layers)
        self.position_head = nn.Linear(d, 2)
        self.attribute_decoder = decoder(cfg.attribute_layers)
        self.attribute_head = nn.Linear(d, 6)

    # -- context ------------------------------------------------------------

    def _check_images(self, *images):
        for img in images:
            if img.shape[-2:] != (self.cfg.image_size, self.cfg.image_size) or img.shape[-3] != 3:
                raise ConfigurationError(
                    f"expected images of shape (B, 3, {self.cfg.image_size}, {self.cfg.image_size}), got {tuple(img.shape)}"
                )

    def extract_visual_features(self, i_ref: torch.Tensor, i_c: torch.Tensor) -> torch.Tensor:
        """Fused feature map of shape (B, d_emb, H', W') from the two image backbones."""
        self._check_images(i_ref, i_c)
        fused = torch.cat([self.backbone_ref(i_ref), self.backbone_canvas(i_c)], dim=1)
        return self.feature_proj(fused)

    def _stroke_pe(self, xy: torch.Tensor) -> torch.Tensor:
        g = self.cfg.feature_hw - 1
        t = torch.arange(1, xy.shape[1] + 1, dtype=xy.dtype, device=xy.device).expand(xy.shape[0], -1)
        return encode_3d(xy[..., 0] * g, xy[..., 1] * g, t, self.cfg.d_emb)

    def _visual_tokens(self, f: torch.Tensor) -> torch.Tensor:
        b, d, h, w = f.shape
        tokens = f.flatten(2).transpose(1, 2)  # (B, H'*W', d)
        ys, xs = torch.meshgrid(
            torch.arange(h, dtype=f.dtype, device=f.device),
            torch.arange(w, dtype=f.dtype, device=f.device),
            indexing="ij",
        )
        pe = encode_3d(xs.reshape(-1), ys.reshape(-1), torch.zeros(h * w, dtype=f.dtype, device=f.device), d)
        return tokens + pe.unsqueeze(0)

    def encode_context(self, i_ref, i_c, s_c, valid=None):
        """Context code c (B, L, d_emb) plus the visual feature map f."""
        if s_c.shape[1] != self.cfg.k:
            raise ConfigurationError(f"expected {self.cfg.k} context strokes, got {s_c.shape[1]}")
        f = self.extract_visual_features(i_ref, i_c)
        if valid is None:
            valid = torch.ones(s_c.shape[:2], dtype=s_c.dtype, device=s_c.device)
        stroke_tokens = self.context_stroke_proj(torch.cat([s_c, valid.unsqueeze(-1)], dim=-1))
        stroke_tokens = stroke_tokens + self._stroke_pe(s_c[..., 0:2])
        tokens = torch.cat([self._visual_tokens(f), stroke_tokens], dim=1)
        return self.context_encoder(tokens), f

    # -- posterior ----------------------------------------------------------

    def encode_posterior(self, s_t, c):
        if s_t.shape[1] != self.cfg.k:
            raise ConfigurationError(f"expected {self.cfg.k} target strokes, got {s_t.shape[1]}")
        tokens = self.target_stroke_proj(s_t) + self._stroke_pe(s_t[..., 0:2])
        stats = self.stat_tokens.to(tokens.dtype).unsqueeze(0).expand(tokens.shape[0], -1, -1)
        out = self.posterior_decoder(torch.cat([stats, tokens], dim=1), c)
        return self.mu_head(out[:, 0]), self.logvar_head(out[:, 1])

    # -- decoding -----------------------------------------------------------

    def _memory(self, z, c):
        return torch.cat([c, self.z_to_token(z).unsqueeze(1)], dim=1)

    def decode_positions(self, z, c) -> torch.Tensor:
        b = z.shape[0]
        queries = encode_1d(self.cfg.k, self.cfg.d_emb, dtype=z.dtype, device=z.device)
        queries = queries.unsqueeze(0).expand(b, -1, -1)
        out = self.position_decoder(queries, self._memory(z, c))
        return torch.sigmoid(self.position_head(out))

    def sample_reference_features(self, f, x_hat) -> torch.Tensor:
        return bilinear_sample(f, x_hat)

    def decode_attributes(self, z, c, f_x, x_hat):
        queries = f_x + self._stroke_pe(x_hat)
        out = torch.sigmoid(self.attribute_head(self.attribute_decoder(queries, self._memory(z, c))))
        return out[..., 0:3], out[..., 3:5], out[..., 5:6]

    def decode(self, z, c, f):
        x_hat = self.decode_positions(z, c)
        f_x = self.sample_reference_features(f, x_hat)
        rho_hat, sigma_hat, omega_hat = self.decode_attributes(z, c, f_x, x_hat)
        return torch.cat([x_hat, rho_hat, sigma_hat, omega_hat], dim=-1)

    def forward(self, i_ref, i_c, s_c, s_t=None, mode="train", valid=None, noise=None, generator=None) -> ModelOutput:
        """Full pass. Train mode needs target strokes and samples the posterior;
        inference mode samples the unit prior; mean mode uses the posterior mean."""
        c, f = self.encode_context(i_ref, i_c, s_c, valid)
        mu = logvar = None
        if mode in ("train", "posterior", "mean"):
            if s_t is None:
                raise ValueError("target strokes are required outside inference mode")
            mu, logvar = self.encode_posterior(s_t, c)
            z = sample_latent(mu, logvar, "mean" if mode == "mean" else "train", noise, generator)
        else:
            b = s_c.shape[0]
            if noise is None:
                noise = torch.randn(b, self.cfg.d_z, dtype=s_c.dtype, device=s_c.device, generator=generator)
            z = noise
        s_hat = self.decode(z, c, f)
        return ModelOutput(
            s_hat=s_hat,
            x_hat=s_hat[..., 0:2],
            rho_hat=s_hat[..., 2:5],
            sigma_hat=s_hat[..., 5:7],
            omega_hat=s_hat[..., 7:8],
            mu=mu,
            logvar=logvar,
            z=z,
            c=c,
            f=f,
        )
