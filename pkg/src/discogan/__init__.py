"""GAN speech enhancement with latents conditioned on a frozen discriminative model."""

from .adversary import MsStftDiscriminator, MsStftDiscriminatorConfig
from .conditioner import AttentionConfig, Conditioner, build_lookahead_mask
from .config import RunConfig, TrainConfig
from .disc_model import DiscModel, DiscModelConfig, FrozenDiscModel, freeze, si_sdr
from .dsp import AudioClip, compress_tf, decompress_tf, istft, stft
from .generator import Generator, GeneratorConfig, generator_forward
from .losses import LossBreakdown, LossWeights, SpectralLossConfig

__version__ = "0.1.0"
