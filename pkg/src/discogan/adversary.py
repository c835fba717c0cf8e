"""Multi-scale STFT discriminator and its hinge / feature-matching losses."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn.utils.parametrizations import weight_norm

from .dsp import stft
from .layers import same_conv


@dataclass
class MsStftDiscriminatorConfig:
    scales: tuple[int, ...] = (2048, 1024, 512, 256, 128)
    channels: int = 32
    kernel: tuple[int, int] = (3, 9)
    dilations: tuple[int, ...] = (1, 2, 4)
    slope: float = 0.2

    def __post_init__(self):
        self.scales = tuple(int(s) for s in self.scales)
        self.kernel = tuple(int(k) for k in self.kernel)
        self.dilations = tuple(int(d) for d in self.dilations)

    @classmethod
    def toy(cls) -> "MsStftDiscriminatorConfig":
        return cls(scales=(512, 256, 128), channels=16)


@dataclass
class ScaleOutput:
    """Logits ``(batch, 1, T_k, F'_k)`` and every layer's activations (logits last)."""

    logits: torch.Tensor
    features: list[torch.Tensor]

    @property
    def frame_logits(self) -> torch.Tensor:
        """``D_{k,t}``: logits averaged over frequency, ``(batch, T_k)``."""
        return self.logits.mean(dim=(1, 3))


DiscOutputs = list[ScaleOutput]


class StftDiscriminator(nn.Module):
    def __init__(self, n_fft: int, cfg: MsStftDiscriminatorConfig):
        super().__init__()
        self.n_fft, self.hop = n_fft, n_fft // 4
        ch = cfg.channels
        convs = [same_conv(2, ch, cfg.kernel)]
        convs += [same_conv(ch, ch, cfg.kernel, dilation=(d, 1), stride=(1, 2)) for d in cfg.dilations]
        convs.append(same_conv(ch, 1, (3, 3)))
        self.convs = nn.ModuleList(weight_norm(c) for c in convs)
        self.act = nn.LeakyReLU(cfg.slope)

    def forward(self, x: torch.Tensor) -> ScaleOutput:
        spec = stft(x, self.n_fft, self.hop) / self.n_fft**0.5
        h = torch.stack([spec.real, spec.imag], dim=1).to(x.dtype)
        features = []
        for i, conv in enumerate(self.convs):
            h = conv(h)
            if i < len(self.convs) - 1:
                h = self.act(h)
            features.append(h)
        return ScaleOutput(h, features)


class MsStftDiscriminator(nn.Module):
    def __init__(self, cfg: MsStftDiscriminatorConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or MsStftDiscriminatorConfig()
        self.nets = nn.ModuleList(StftDiscriminator(n, cfg) for n in cfg.scales)

    def forward(self, x: torch.Tensor) -> DiscOutputs:
        longest = max(self.cfg.scales)
        if x.shape[-1] < longest:
            raise ValueError(f"clip of {x.shape[-1]} samples is shorter than the {longest}-sample window")
        return [net(x) for net in self.nets]


def gen_adv_loss(out_fake: DiscOutputs) -> torch.Tensor:
    per_scale = [torch.relu(1 - o.frame_logits).mean(dim=1) for o in out_fake]
    return torch.stack(per_scale).mean(dim=0).mean()


def feat_match_loss(out_real: DiscOutputs, out_fake: DiscOutputs) -> torch.Tensor:
    """Mean over scales and layers of the per-frame L1 feature distance."""
    if len(out_real) != len(out_fake):
        raise ValueError("real and fake outputs have different numbers of scales")
    terms = []
    for real, fake in zip(out_real, out_fake):
        if len(real.features) != len(fake.features):
            raise ValueError("real and fake outputs have different numbers of layers")
        for fr, ff in zip(real.features, fake.features):
            if fr.shape != ff.shape:
                raise ValueError(f"feature shape mismatch {tuple(fr.shape)} vs {tuple(ff.shape)}")
            per_frame = (fr - ff).abs().sum(dim=(1, 3))
            terms.append(per_frame.mean(dim=1))
    return torch.stack(terms).mean(dim=0).mean()


def disc_train_loss(out_real: DiscOutputs, out_fake: DiscOutputs) -> torch.Tensor:
    per_scale = [
        (torch.relu(1 - r.frame_logits) + torch.relu(1 + f.frame_logits)).mean(dim=1)
        for r, f in zip(out_real, out_fake)
    ]
    return torch.stack(per_scale).mean(dim=0).mean()
