from .config import ModelConfig, tiny_config  # noqa: F401
from .encoding import bilinear_sample, encode_1d, encode_3d, sinusoidal_encoding  # noqa: F401
from .net import ConfigurationError, ModelOutput, SuggestionModel, sample_latent  # noqa: F401
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint  # noqa: F401
