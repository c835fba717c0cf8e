"""SEANet-style time-frequency generator with residual FiLM skip conditioning."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .conditioner import AttentionConfig, Conditioner
from .dsp import FREQ_USED, HOP, WINDOW_SIZE, compress_tf, decompress_tf, istft, stft
from .layers import ChannelNorm, FreqDown, FreqUp, same_conv


@dataclass
class GeneratorConfig:
    C: int = 32
    B: int = 8
    C_l: int = 128
    down_kernel: tuple[int, int] = (2, 4)
    res_kernel: tuple[int, int] = (3, 3)
    max_channels: int = 512
    lstm_units: int = 512
    lstm_layers: int = 2
    film_reduction: int = 8
    film_kernel: tuple[int, int] = (1, 3)
    heads: int = 2
    lookahead: int = 20
    disc_latent_dim: int = 256
    conditioning: bool = True
    window_size: int = WINDOW_SIZE
    hop: int = HOP

    def __post_init__(self):
        for name in ("down_kernel", "res_kernel", "film_kernel"):
            setattr(self, name, tuple(int(k) for k in getattr(self, name)))
        if FREQ_USED % 2**self.B:
            raise ValueError(f"{FREQ_USED} frequency bins are not divisible by 2**{self.B}")

    @classmethod
    def toy(cls, **overrides) -> "GeneratorConfig":
        base = dict(C=8, B=4, C_l=32, lstm_units=64, disc_latent_dim=64)
        return cls(**{**base, **overrides})

    def channel_schedule(self) -> list[int]:
        """Output channels of each encoder block."""
        return [min(self.C * 2 ** (i + 1), self.max_channels) for i in range(self.B)]

    def block_inputs(self) -> list[int]:
        return [self.C] + self.channel_schedule()[:-1]

    @property
    def bottom_bins(self) -> int:
        return FREQ_USED // 2**self.B

    def attention(self) -> AttentionConfig:
        return AttentionConfig(self.heads, self.C_l, self.lookahead, self.disc_latent_dim)


class ResidualUnit(nn.Module):
    def __init__(self, channels: int, kernel=(3, 3)):
        super().__init__()
        self.conv1 = same_conv(channels, channels, kernel)
        self.norm1 = ChannelNorm(channels)
        self.conv2 = same_conv(channels, channels, kernel)
        self.norm2 = ChannelNorm(channels)

    def forward(self, x):
        h = self.norm1(self.conv1(F.elu(x)))
        h = self.norm2(self.conv2(F.elu(h)))
        return x + h


def film_apply(d, gamma, beta, attn):
    return d + ((gamma * attn) * d + beta * attn)


class FiLM(nn.Module):
    """Residual FiLM: scale/shift decoder features from the matching encoder skip.

    ``gamma = relu(conv(e))`` and ``beta = sigmoid(conv(e))`` are both gated by
    one attention map ``A = sigmoid(conv(relu(conv(e))))`` whose hidden width is
    the skip width divided by ``reduction``.
    """

    def __init__(self, skip_channels: int, channels: int, kernel=(1, 3), reduction: int = 8):
        super().__init__()
        hidden = max(skip_channels // reduction, 1)
        self.gamma = same_conv(skip_channels, channels, kernel)
        self.beta = same_conv(skip_channels, channels, kernel)
        self.attn_down = same_conv(skip_channels, hidden, kernel)
        self.attn_up = same_conv(hidden, channels, kernel)

    def terms(self, e):
        gamma = torch.relu(self.gamma(e))
        beta = torch.sigmoid(self.beta(e))
        attn = torch.sigmoid(self.attn_up(torch.relu(self.attn_down(e))))
        return gamma, beta, attn

    def forward(self, d, e):
        if d.shape[-2:] != e.shape[-2:]:
            raise ValueError(f"FiLM resolution mismatch: {tuple(d.shape)} vs {tuple(e.shape)}")
        return film_apply(d, *self.terms(e))


class Encoder(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        self.inp = nn.Sequential(same_conv(2, cfg.C, cfg.res_kernel), ChannelNorm(cfg.C))
        self.res = nn.ModuleList(ResidualUnit(c, cfg.res_kernel) for c in cfg.block_inputs())
        self.down = nn.ModuleList(
            nn.Sequential(nn.ELU(), FreqDown(cin, cout, cfg.down_kernel), ChannelNorm(cout))
            for cin, cout in zip(cfg.block_inputs(), cfg.channel_schedule())
        )
        flat = cfg.channel_schedule()[-1] * cfg.bottom_bins
        self.lstm = nn.LSTM(flat, cfg.lstm_units, num_layers=cfg.lstm_layers, batch_first=True)
        self.to_latent = nn.Conv1d(cfg.lstm_units, cfg.C_l, 1)

    def forward(self, img: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        if img.shape[-1] != FREQ_USED:
            raise ValueError(f"expected {FREQ_USED} frequency bins, got {img.shape[-1]}")
        h = self.inp(img)
        skips = []
        for res, down in zip(self.res, self.down):
            h = res(h)
            skips.append(h)
            h = down(h)
        batch, chans, frames, bins = h.shape
        seq, _ = self.lstm(h.permute(0, 2, 1, 3).reshape(batch, frames, chans * bins))
        g_l = self.to_latent(seq.transpose(1, 2)).transpose(1, 2)
        return g_l, skips


class Decoder(nn.Module):
    def __init__(self, cfg: GeneratorConfig, use_film: bool = True):
        super().__init__()
        self.cfg, self.use_film = cfg, use_film
        self.bottom = cfg.channel_schedule()[-1]
        self.entry = nn.Conv1d(2 * cfg.C_l, self.bottom * cfg.bottom_bins, 1)
        ins, outs = cfg.block_inputs()[::-1], cfg.channel_schedule()[::-1]
        self.up = nn.ModuleList(
            nn.Sequential(nn.ELU(), FreqUp(cin, cout, cfg.down_kernel), ChannelNorm(cout))
            for cin, cout in zip(outs, ins)
        )
        self.film = nn.ModuleList(FiLM(c, c, cfg.film_kernel, cfg.film_reduction) for c in ins)
        self.res = nn.ModuleList(ResidualUnit(c, cfg.res_kernel) for c in ins)
        self.out = nn.Sequential(nn.ELU(), same_conv(cfg.C, 3, cfg.res_kernel))

    def forward(self, z_l: torch.Tensor, skips: list[torch.Tensor]) -> torch.Tensor:
        cfg = self.cfg
        if z_l.shape[-1] != 2 * cfg.C_l:
            raise ValueError(f"expected latent width {2 * cfg.C_l}, got {z_l.shape[-1]}")
        if len(skips) != cfg.B:
            raise ValueError(f"expected {cfg.B} skip tensors, got {len(skips)}")
        batch, frames, _ = z_l.shape
        h = self.entry(z_l.transpose(1, 2))
        h = h.reshape(batch, self.bottom, cfg.bottom_bins, frames).transpose(2, 3)
        for up, film, res, skip in zip(self.up, self.film, self.res, reversed(skips)):
            h = up(h)
            if h.shape != skip.shape:
                raise ValueError(f"decoder features {tuple(h.shape)} do not match skip {tuple(skip.shape)}")
            if self.use_film:
                h = film(h, skip)
            h = res(h)
        return self.out(h)


class Generator(nn.Module):
    """Noisy waveform in, enhanced waveform out.

    With ``cfg.conditioning`` the latents are fused with the frozen model's
    latents (DisCoGAN); otherwise zeros stand in for the attention output
    (NoCoGAN) so the decoder is shaped identically.
    """

    def __init__(self, cfg: GeneratorConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or GeneratorConfig()
        self.encoder = Encoder(cfg)
        self.conditioner = Conditioner(cfg.attention()) if cfg.conditioning else None
        self.decoder = Decoder(cfg)

    @property
    def decoder_lookahead(self) -> int:
        """Future frames of ``z_l`` that one decoder output frame depends on."""
        kt = self.cfg.res_kernel[0] // 2
        return 2 * kt * self.cfg.B + kt

    def fuse(self, g_l: torch.Tensor, d_l: torch.Tensor | None) -> torch.Tensor:
        if self.conditioner is None:
            return torch.cat([g_l, torch.zeros_like(g_l)], dim=-1)
        if d_l is None:
            raise ValueError("a conditioned generator needs discriminative latents")
        return self.conditioner(g_l, d_l.to(g_l.dtype))

    def forward(self, x: torch.Tensor, d_l: torch.Tensor | None = None) -> torch.Tensor:
        cfg = self.cfg
        spec = stft(x, cfg.window_size, cfg.hop)
        img = compress_tf(spec).to(x.dtype)
        g_l, skips = self.encoder(img)
        out = self.decoder(self.fuse(g_l, d_l), skips)
        return istft(decompress_tf(out), x.shape[-1], cfg.window_size, cfg.hop)


def generator_forward(x: torch.Tensor, frozen_disc, gen: Generator, use_conditioning: bool | None = None) -> torch.Tensor:
    """Enhance ``x``; the frozen model is only consulted when conditioning is on."""
    conditioned = gen.conditioner is not None
    if use_conditioning is not None and use_conditioning != conditioned:
        raise ValueError(f"generator was built with conditioning={conditioned}")
    d_l = frozen_disc.latents(x) if conditioned else None
    return gen(x, d_l)


def config_dict(cfg: GeneratorConfig) -> dict:
    return asdict(cfg)
