"""Reconstruction losses and the weighted generator objective."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch

from .dsp import LOG_EPS, SAMPLE_RATE, log_power_spectrogram, mel_spectrogram


@dataclass
class LossWeights:
    t: float = 1.0
    f: float = 1.0
    adv: float = 1.0 / 9.0
    feat: float = 100.0 / 9.0

    def __post_init__(self):
        if min(self.t, self.f, self.adv, self.feat) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class SpectralLossConfig:
    exponents: tuple[int, ...] = (5, 6, 7, 8, 9, 10)
    n_mels: int = 64
    eps: float = LOG_EPS
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.exponents = tuple(int(i) for i in self.exponents)

    def windows(self) -> list[int]:
        return [2**i for i in self.exponents]

    def mels_for(self, window: int) -> int:
        return min(self.n_mels, window // 2)


@dataclass
class LossBreakdown:
    l_t: float
    l_f: float
    l_adv: float
    l_feat: float
    total: float

    def as_dict(self) -> dict:
        return asdict(self)


def time_loss(s: torch.Tensor, s_hat: torch.Tensor) -> torch.Tensor:
    if s.shape != s_hat.shape:
        raise ValueError(f"length mismatch {tuple(s.shape)} vs {tuple(s_hat.shape)}")
    return (s - s_hat).abs().mean()


def _rms(d: torch.Tensor) -> torch.Tensor:
    return d.pow(2).flatten(-2).mean(-1).sqrt()


def _mean_abs(d: torch.Tensor) -> torch.Tensor:
    return d.abs().flatten(-2).mean(-1)


def freq_loss(s: torch.Tensor, s_hat: torch.Tensor, cfg: SpectralLossConfig | None = None) -> torch.Tensor:
    """Multi-resolution L1 + L2 distance on log-power and log-Mel spectra.

    L1 is the entrywise mean and L2 the root-mean-square, taken per clip and
    resolution, then averaged over resolutions and the batch.
    """
    cfg = cfg or SpectralLossConfig()
    if s.shape != s_hat.shape:
        raise ValueError(f"length mismatch {tuple(s.shape)} vs {tuple(s_hat.shape)}")
    longest = max(cfg.windows())
    if s.shape[-1] < longest:
        raise ValueError(f"clips need at least {longest} samples, got {s.shape[-1]}")
    total = 0.0
    for win in cfg.windows():
        ds = log_power_spectrogram(s, win) - log_power_spectrogram(s_hat, win)
        n_mels = cfg.mels_for(win)
        dm = mel_spectrogram(s, win, n_mels, cfg.sample_rate) - mel_spectrogram(s_hat, win, n_mels, cfg.sample_rate)
        total = total + _mean_abs(ds) + _rms(ds) + _mean_abs(dm) + _rms(dm)
    return (total / len(cfg.windows())).mean()


def weighted_total(l_t, l_f, l_adv, l_feat, w: LossWeights):
    return w.t * l_t + w.f * l_f + w.adv * l_adv + w.feat * l_feat


def total_gen_loss(parts: dict, w: LossWeights | None = None) -> LossBreakdown:
    """Record the four loss terms and their weighted sum."""
    w = w or LossWeights()
    values = {}
    for name in ("l_t", "l_f", "l_adv", "l_feat"):
        v = float(parts[name])
        if not math.isfinite(v):
            raise FloatingPointError(f"loss term {name} is not finite ({v})")
        values[name] = v
    total = weighted_total(values["l_t"], values["l_f"], values["l_adv"], values["l_feat"], w)
    return LossBreakdown(total=total, **values)
