"""Model hyperparameters."""

from dataclasses import asdict, dataclass, field

N_BACKBONE_BLOCKS = 4  # each block halves spatial resolution


@dataclass(frozen=True)
class ModelConfig:
    """Configuration of the conditional transformer VAE.

    Defaults follow the published setup: 256-d embeddings, 4 heads, 1024-wide
    feed-forward, zero dropout, an 8-layer context encoder and 6-layer
    posterior/position/attribute decoders, window length k=8 and 256px inputs
    reduced to a 16x16 feature map (so 256 + 8 = 264 context tokens).
    """

    d_emb: int = 256
    n_heads: int = 4
    ff_dim: int = 1024
    dropout: float = 0.0
    context_layers: int = 8
    posterior_layers: int = 6
    position_layers: int = 6
    attribute_layers: int = 6
    k: int = 8
    image_size: int = 256
    d_z: int = 256
    backbone_channels: tuple = (32, 64, 128, 256)

    def __post_init__(self):
        if self.d_emb % self.n_heads != 0:
            raise ValueError("d_emb must be divisible by n_heads")
        if len(self.backbone_channels) != N_BACKBONE_BLOCKS:
            raise ValueError(f"backbone needs exactly {N_BACKBONE_BLOCKS} channel widths")
        if self.image_size % (2**N_BACKBONE_BLOCKS) != 0:
            raise ValueError("image_size must be divisible by 16")

    @property
    def feature_hw(self) -> int:
        return self.image_size // (2**N_BACKBONE_BLOCKS)

    @property
    def token_len(self) -> int:
        return self.feature_hw * self.feature_hw + self.k

    def to_dict(self):
        d = asdict(self)
        d["backbone_channels"] = list(self.backbone_channels)
        return d

    @classmethod
    def from_dict(cls, d) -> "ModelConfig":
        d = dict(d)
        d["backbone_channels"] = tuple(d["backbone_channels"])
        return cls(**d)


def tiny_config(d_emb=64, layers=2, image_size=64, k=8) -> ModelConfig:
    """Desk-scale configuration used by tests and quick experiments."""
    return ModelConfig(
        d_emb=d_emb,
        n_heads=4 if d_emb % 4 == 0 else 2,
        ff_dim=4 * d_emb,
        context_layers=layers,
        posterior_layers=layers,
        position_layers=layers,
        attribute_layers=layers,
        k=k,
        image_size=image_size,
        d_z=d_emb,
        backbone_channels=(16, 32, 48, d_emb),
    )
