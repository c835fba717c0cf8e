"""Discriminative enhancer used as the frozen conditioning network.

A real-valued stand-in for DCCRN: a strided conv encoder over the stacked real
and imaginary STFT, a two-layer LSTM bottleneck, and a mirrored decoder with
skip concatenation that predicts an unbounded complex ratio mask.  The output
sequence of the last LSTM layer is exported as the conditioning latents.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

from . import checkpoint
from .dsp import FREQ_USED, HOP, WINDOW_SIZE, istft, stft
from .layers import ChannelNorm, FreqDown, FreqUp

SI_SDR_CAP = 100.0


@dataclass
class DiscModelConfig:
    channels: tuple[int, ...] = (16, 32, 64, 128, 256, 256)
    kernel: tuple[int, int] = (2, 4)
    hidden: int = 256
    lstm_layers: int = 2
    window_size: int = WINDOW_SIZE
    hop: int = HOP

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.kernel = tuple(int(k) for k in self.kernel)
        if FREQ_USED % 2 ** len(self.channels):
            raise ValueError(f"{FREQ_USED} bins cannot be halved {len(self.channels)} times")

    @property
    def latent_dim(self) -> int:
        return self.hidden

    @classmethod
    def toy(cls) -> "DiscModelConfig":
        return cls(channels=(8, 16, 32, 32), hidden=64)


class DiscModel(nn.Module):
    def __init__(self, cfg: DiscModelConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or DiscModelConfig()
        chans = (2,) + cfg.channels
        self.encoder = nn.ModuleList(
            nn.Sequential(FreqDown(chans[i], chans[i + 1], cfg.kernel), ChannelNorm(chans[i + 1]), nn.PReLU())
            for i in range(len(cfg.channels))
        )
        self.bottom_bins = FREQ_USED // 2 ** len(cfg.channels)
        flat = cfg.channels[-1] * self.bottom_bins
        self.proj_in = nn.Linear(flat, cfg.hidden)
        self.lstm = nn.LSTM(cfg.hidden, cfg.hidden, num_layers=cfg.lstm_layers, batch_first=True)
        self.proj_out = nn.Linear(cfg.hidden, flat)
        decoder = []
        for i in reversed(range(len(cfg.channels))):
            cout = chans[i]
            layers = [FreqUp(2 * chans[i + 1], cout, cfg.kernel)]
            if i > 0:
                layers += [ChannelNorm(cout), nn.PReLU()]
            decoder.append(nn.Sequential(*layers))
        self.decoder = nn.ModuleList(decoder)

    @property
    def mask_layer(self) -> FreqUp:
        return self.decoder[-1][0]

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Return ``(s_hat, d_l)`` for noisy audio ``x`` of shape ``(batch, samples)``."""
        if not torch.isfinite(x).all():
            raise ValueError("non-finite input audio")
        cfg = self.cfg
        spec = stft(x, cfg.window_size, cfg.hop)
        h = torch.stack([spec.real, spec.imag], dim=1)[..., :FREQ_USED].to(x.dtype)
        skips = []
        for block in self.encoder:
            h = block(h)
            skips.append(h)
        batch, chans, frames, bins = h.shape
        seq = h.permute(0, 2, 1, 3).reshape(batch, frames, chans * bins)
        latents, _ = self.lstm(self.proj_in(seq))
        h = self.proj_out(latents).reshape(batch, frames, chans, bins).permute(0, 2, 1, 3)
        for block, skip in zip(self.decoder, reversed(skips)):
            h = block(torch.cat([h, skip], dim=1))
        mask = torch.complex(h[:, 0], h[:, 1])
        # Nyquist bin reuses the top mask bin
        mask = torch.cat([mask, mask[..., -1:]], dim=-1)
        s_hat = istft(spec * mask.to(spec.dtype), x.shape[-1], cfg.window_size, cfg.hop)
        return s_hat.to(x.dtype), latents


def si_sdr(reference: torch.Tensor, estimate: torch.Tensor) -> torch.Tensor:
    """Scale-invariant SDR in dB along the last axis, capped at +100 dB."""
    if reference.shape != estimate.shape:
        raise ValueError(f"shape mismatch {tuple(reference.shape)} vs {tuple(estimate.shape)}")
    ref_energy = (reference * reference).sum(-1, keepdim=True)
    if (ref_energy <= 0).any():
        raise ValueError("SI-SDR is undefined for a silent reference")
    alpha = (estimate * reference).sum(-1, keepdim=True) / ref_energy
    target = alpha * reference
    residual = estimate - target
    t2 = (target * target).sum(-1)
    e2 = (residual * residual).sum(-1)
    tiny = torch.finfo(reference.dtype).tiny
    ratio = 10.0 * torch.log10(t2.clamp_min(tiny) / e2.clamp_min(tiny))
    return ratio.clamp(max=SI_SDR_CAP)


def train_disc_step(model: DiscModel, optimizer: torch.optim.Optimizer, x: torch.Tensor, s: torch.Tensor) -> float:
    """One optimiser step on negative SI-SDR.  Returns the loss before the step."""
    model.train()
    optimizer.zero_grad(set_to_none=True)
    s_hat, _ = model(x)
    loss = -si_sdr(s, s_hat).mean()
    if not torch.isfinite(loss):
        raise FloatingPointError(f"discriminative model diverged (loss={loss.item()})")
    loss.backward()
    optimizer.step()
    return loss.item()


class FrozenDiscModel:
    """Inference-only view of a trained :class:`DiscModel`.

    Parameters have ``requires_grad`` disabled and every call runs under
    ``no_grad``, so nothing downstream can update them.
    """

    def __init__(self, model: DiscModel):
        self._model = model.eval().requires_grad_(False)
        self.fingerprint = checkpoint.fingerprint(model)

    @property
    def cfg(self) -> DiscModelConfig:
        return self._model.cfg

    def __call__(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        with torch.no_grad():
            return self._model(x)

    def latents(self, x: torch.Tensor) -> torch.Tensor:
        return self(x)[1]

    def current_fingerprint(self) -> str:
        return checkpoint.fingerprint(self._model)

    def state_dict(self):
        return self._model.state_dict()

    def to(self, dtype):
        """Cast once before training; the fingerprint is re-recorded for the new dtype."""
        self._model.to(dtype)
        self.fingerprint = checkpoint.fingerprint(self._model)
        return self


def freeze(model: DiscModel) -> FrozenDiscModel:
    return FrozenDiscModel(model)


def disc_payload(model: DiscModel) -> dict:
    cfg = model.cfg
    return {
        "config": asdict(cfg),
        "stft": {"window_size": cfg.window_size, "hop": cfg.hop},
        "params": model.state_dict(),
        "fingerprint": checkpoint.fingerprint(model),
    }


def disc_from_payload(payload: dict) -> DiscModel:
    model = DiscModel(DiscModelConfig(**payload["config"]))
    model.load_state_dict(payload["params"])
    if checkpoint.fingerprint(model) != payload["fingerprint"]:
        raise ValueError("discriminative model parameters do not match the stored fingerprint")
    return model


def save_disc(path, model: DiscModel, extra: dict | None = None) -> None:
    checkpoint.save(path, "disc", {**disc_payload(model), **(extra or {})})


def load_disc(path) -> DiscModel:
    return disc_from_payload(checkpoint.load(path, "disc"))
