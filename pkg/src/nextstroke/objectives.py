"""Training losses and the neighbor-difference stroke features they share with evaluation.

All squared-error terms are means over strokes and component dimensions, so
the loss weights keep their meaning for any window length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .model.encoding import bilinear_sample

VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class LossWeights:
    lambda_kl: float = 2.5e-4
    lambda_col: float = 2.5e-2
    lambda_col_reg: float = 2.5e-3
    lambda_dist_reg: float = 5.0e-6
    lambda_x: float = 1.0
    lambda_rho: float = 0.25
    lambda_sigma: float = 1.0
    lambda_omega: float = 1.0

    def __post_init__(self):
        if min(vars(self).values()) < 0:
            raise ValueError("loss weights must be non-negative")

    def to_dict(self):
        return dict(vars(self))


@dataclass(frozen=True)
class FeatureConfig:
    """Neighbor-difference feature settings.

    ``include_sigma_omega=False`` drops size and orientation from the feature
    vector (5 dims per stroke instead of 8), which is how the distribution
    regularizer is computed; evaluation uses the full 8 by default.
    """

    l_max: int = 4
    include_sigma_omega: bool = True

    @property
    def dims_per_stroke(self) -> int:
        return 8 if self.include_sigma_omega else 5

    def feature_dim(self, seq_len: int) -> int:
        if self.l_max >= seq_len:
            raise ValueError(f"l_max={self.l_max} must be smaller than the sequence length {seq_len}")
        return self.dims_per_stroke * sum(seq_len - l for l in range(1, self.l_max + 1))


@dataclass
class DiagonalGaussian:
    mu: torch.Tensor
    var: torch.Tensor

    def __post_init__(self):
        if self.mu.shape != self.var.shape:
            raise ValueError("mu and var must share a shape")


def reconstruction_loss(s_t: torch.Tensor, s_hat: torch.Tensor, w: LossWeights) -> torch.Tensor:
    """Weighted squared reconstruction error over the four stroke parameter groups."""
    if s_t.shape != s_hat.shape:
        raise ValueError(f"shape mismatch {tuple(s_t.shape)} vs {tuple(s_hat.shape)}")
    diff = s_t - s_hat
    return (
        w.lambda_x * diff[..., 0:2].pow(2).mean()
        + w.lambda_rho * diff[..., 2:5].pow(2).mean()
        + w.lambda_sigma * diff[..., 5:7].pow(2).mean()
        + w.lambda_omega * diff[..., 7:8].pow(2).mean()
    )


def kl_to_unit_prior(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """KL(N(mu, diag(exp(logvar))) || N(0, I)), summed over dims, averaged over the batch."""
    kl = 0.5 * (mu.pow(2) + logvar.exp() - logvar - 1.0).sum(dim=-1)
    return kl.mean()


def color_target(i_ref: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    """Reference-image color under each predicted center, by bilinear lookup.

    i_ref: (B, 3, H, W); x_hat: (B, k, 2). Differentiable in x_hat.
    """
    return bilinear_sample(i_ref, x_hat)


def color_loss(rho_hat: torch.Tensor, rho_tilde: torch.Tensor) -> torch.Tensor:
    return (rho_hat - rho_tilde).pow(2).mean()


def stroke_features(seq: torch.Tensor, cfg: FeatureConfig) -> torch.Tensor:
    """Concatenated stroke differences at offsets 1..l_max.

    seq: (..., L, 8). Returns (..., d) with
    d = dims_per_stroke * sum_l (L - l); blocks ordered by offset l, then
    position i, then parameter dimension.
    """
    seq_len = seq.shape[-2]
    cfg.feature_dim(seq_len)  # validates l_max < L
    if not cfg.include_sigma_omega:
        seq = seq[..., 0:5]
    parts = []
    for l in range(1, cfg.l_max + 1):
        parts.append((seq[..., l:, :] - seq[..., : seq_len - l, :]).flatten(-2))
    return torch.cat(parts, dim=-1)


def fit_diag_gaussian(batch: torch.Tensor, floor: float = VARIANCE_FLOOR) -> DiagonalGaussian:
    """Per-dimension mean and population variance (floored) of a (N, D) batch."""
    if batch.ndim != 2 or batch.shape[0] < 2:
        raise ValueError("need a (N>=2, D) batch to fit a Gaussian")
    mu = batch.mean(dim=0)
    var = batch.var(dim=0, unbiased=False).clamp_min(floor)
    return DiagonalGaussian(mu, var)


def distribution_matching_loss(p_hat: DiagonalGaussian, p_data: DiagonalGaussian) -> torch.Tensor:
    """KL(N(mu_hat, var_hat) || N(mu_data, var_data)) for diagonal Gaussians."""
    if p_hat.mu.shape != p_data.mu.shape:
        raise ValueError("dimension mismatch between generated and dataset Gaussians")
    return (
        0.5 * torch.log(p_data.var / p_hat.var)
        + (p_hat.var + (p_hat.mu - p_data.mu).pow(2)) / (2.0 * p_data.var)
        - 0.5
    ).sum()


def total_objective(
    model,
    batch: dict,
    weights: LossWeights,
    feature_cfg: FeatureConfig | None = None,
    data_gaussian: DiagonalGaussian | None = None,
    post_noise=None,
    prior_noise=None,
    generator=None,
):
    """Full training objective on one batch; returns (total, per-term breakdown).

    The reconstruction/KL/color terms use a posterior sample; the two
    regularizers rerun the decoder on a prior sample with the same context.
    The breakdown holds the raw (unweighted) term values.
    """
    feature_cfg = feature_cfg or FeatureConfig(include_sigma_omega=False)
    s_t = batch["s_t"]
    out = model(
        batch["i_ref"], batch["i_c"], batch["s_c"], s_t,
        mode="train", valid=batch.get("valid"), noise=post_noise, generator=generator,
    )
    recon = reconstruction_loss(s_t, out.s_hat, weights)
    kl = kl_to_unit_prior(out.mu, out.logvar)
    col = color_loss(out.rho_hat, color_target(batch["i_ref"], out.x_hat))

    if prior_noise is None:
        prior_noise = torch.randn(out.z.shape, dtype=out.z.dtype, device=out.z.device, generator=generator)
    s_hat_prior = model.decode(prior_noise, out.c, out.f)
    col_reg = color_loss(s_hat_prior[..., 2:5], color_target(batch["i_ref"], s_hat_prior[..., 0:2]))

    if data_gaussian is not None:
        psi = stroke_features(torch.cat([batch["s_c"], s_hat_prior], dim=1), feature_cfg)
        dist_reg = distribution_matching_loss(fit_diag_gaussian(psi), data_gaussian)
    else:
        dist_reg = torch.zeros((), dtype=recon.dtype, device=recon.device)

    total = (
        recon
        + weights.lambda_kl * kl
        + weights.lambda_col * col
        + weights.lambda_col_reg * col_reg
        + weights.lambda_dist_reg * dist_reg
    )
    breakdown = {
        "recon": float(recon.detach()),
        "kl": float(kl.detach()),
        "col": float(col.detach()),
        "col_reg": float(col_reg.detach()),
        "dist_reg": float(dist_reg.detach()),
        "total": float(total.detach()),
    }
    return total, breakdown


# -- dataset feature statistics ----------------------------------------------


def dataset_feature_stats(dataset, feature_cfg: FeatureConfig, k: int, max_windows_per_record: int = 32, seed: int = 0):
    """Fit the frozen dataset-side Gaussian over 2k-length windows of the training split."""
    from .windows import feasible_split_indices

    rng = np.random.default_rng(seed)
    rows = []
    for record in dataset.train_records:
        params = record.strokes.params
        ts = list(feasible_split_indices(len(params), k))
        if not ts:
            continue
        if len(ts) > max_windows_per_record:
            ts = sorted(rng.choice(ts, size=max_windows_per_record, replace=False))
        for t in ts:
            window = params[t - k : t + k]
            rows.append(stroke_features(torch.as_tensor(window, dtype=torch.float64), feature_cfg).numpy())
    if len(rows) < 2:
        raise ValueError("not enough training windows to fit dataset feature statistics")
    batch = torch.as_tensor(np.stack(rows))
    return fit_diag_gaussian(batch)


def save_feature_stats(path, gaussian: DiagonalGaussian, feature_cfg: FeatureConfig, manifest_checksum: str) -> None:
    np.savez(
        path,
        mu=gaussian.mu.numpy(),
        var=gaussian.var.numpy(),
        l_max=feature_cfg.l_max,
        include_sigma_omega=feature_cfg.include_sigma_omega,
        manifest_checksum=manifest_checksum,
    )


def load_feature_stats(path, expected_checksum: str | None = None):
    data = np.load(path, allow_pickle=False)
    if expected_checksum is not None and str(data["manifest_checksum"]) != expected_checksum:
        raise ValueError("feature statistics were computed for a different manifest")
    cfg = FeatureConfig(l_max=int(data["l_max"]), include_sigma_omega=bool(data["include_sigma_omega"]))
    return DiagonalGaussian(torch.as_tensor(data["mu"]), torch.as_tensor(data["var"])), cfg
