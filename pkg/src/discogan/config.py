"""Run configuration: dataclass sections persisted as an INI-style text file."""

from __future__ import annotations

import ast
import configparser
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .adversary import MsStftDiscriminatorConfig
from .disc_model import DiscModelConfig
from .generator import GeneratorConfig
from .losses import LossWeights, SpectralLossConfig

CONDITIONING_MODES = ("discogan", "nocogan")


@dataclass
class TrainConfig:
    batch_size: int = 16
    iterations: int = 600_000
    stage1_iterations: int = 600_000
    lr: float = 3e-4
    betas: tuple[float, float] = (0.5, 0.9)
    stage1_lr: float = 3e-4
    stage1_betas: tuple[float, float] = (0.9, 0.999)
    seed: int = 0
    checkpoint_every: int = 10_000
    conditioning: str = "discogan"
    dtype: str = "float32"

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        self.stage1_betas = tuple(float(b) for b in self.stage1_betas)
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.lr <= 0 or self.stage1_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.conditioning not in CONDITIONING_MODES:
            raise ValueError(f"conditioning must be one of {CONDITIONING_MODES}")


SECTIONS = {
    "train": TrainConfig,
    "generator": GeneratorConfig,
    "disc_model": DiscModelConfig,
    "adversary": MsStftDiscriminatorConfig,
    "loss_weights": LossWeights,
    "spectral_loss": SpectralLossConfig,
}


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    disc_model: DiscModelConfig = field(default_factory=DiscModelConfig)
    adversary: MsStftDiscriminatorConfig = field(default_factory=MsStftDiscriminatorConfig)
    loss_weights: LossWeights = field(default_factory=LossWeights)
    spectral_loss: SpectralLossConfig = field(default_factory=SpectralLossConfig)

    def __post_init__(self):
        self.sync()

    def sync(self) -> "RunConfig":
        """Derive the generator fields that depend on other sections."""
        self.generator.conditioning = self.train.conditioning == "discogan"
        self.generator.disc_latent_dim = self.disc_model.latent_dim
        return self

    @classmethod
    def full(cls) -> "RunConfig":
        return cls()

    @classmethod
    def toy(cls, **train_overrides) -> "RunConfig":
        train = TrainConfig(
            **{"batch_size": 4, "iterations": 500, "stage1_iterations": 200, "checkpoint_every": 100, **train_overrides}
        )
        return cls(
            train=train,
            generator=GeneratorConfig.toy(),
            disc_model=DiscModelConfig.toy(),
            adversary=MsStftDiscriminatorConfig.toy(),
        )

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(**{name: SECTIONS[name](**data.get(name, {})) for name in SECTIONS})

    def save(self, path) -> None:
        parser = _parser()
        for name, values in self.to_dict().items():
            parser[name] = {k: repr(v) for k, v in values.items()}
        with open(path, "w", encoding="utf-8") as fh:
            parser.write(fh)

    @classmethod
    def load(cls, path, base: "RunConfig | None" = None) -> "RunConfig":
        """Read ``key = value`` sections on top of ``base`` (full-size defaults)."""
        parser = _parser()
        if not parser.read(Path(path), encoding="utf-8"):
            raise FileNotFoundError(f"cannot read config file {path}")
        data = (base or cls.full()).to_dict()
        for section in parser.sections():
            if section not in SECTIONS:
                raise ValueError(f"unknown config section [{section}]")
            known = {f.name for f in fields(SECTIONS[section])}
            for key, raw in parser[section].items():
                if key not in known:
                    raise ValueError(f"unknown key {key!r} in [{section}]")
                data[section][key] = _parse_value(raw)
        return cls.from_dict(data)


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys such as C and C_l are case-sensitive
    return parser


def _parse_value(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw.strip()
