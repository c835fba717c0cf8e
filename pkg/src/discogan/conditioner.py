"""Cross-attention from generator latents onto discriminative latents."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

MASK_FILL = -1e9


@dataclass
class AttentionConfig:
    heads: int = 2
    model_dim: int = 128
    lookahead: int = 20
    latent_dim: int = 256

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ValueError(f"model_dim {self.model_dim} is not divisible by {self.heads} heads")
        if self.lookahead < 0:
            raise ValueError("lookahead must be non-negative")


def build_lookahead_mask(frames: int, lookahead: int) -> torch.Tensor:
    """``allowed[t, u]`` is true iff ``u <= t + lookahead``."""
    if frames < 1:
        raise ValueError("need at least one frame")
    return torch.ones(frames, frames, dtype=torch.bool).tril(lookahead)


class MaskedMultiHeadAttention(nn.Module):
    def __init__(self, dim: int, heads: int, lookahead: int):
        super().__init__()
        self.heads, self.lookahead = heads, lookahead
        self.head_dim = dim // heads
        self.query = nn.Linear(dim, dim)
        self.key = nn.Linear(dim, dim)
        self.value = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, dim)

    def _split(self, x):
        b, t, _ = x.shape
        return x.view(b, t, self.heads, self.head_dim).transpose(1, 2)

    def weights(self, q: torch.Tensor, kv: torch.Tensor) -> torch.Tensor:
        """Softmax attention weights, ``(batch, heads, T, T)``."""
        if q.shape[1] != kv.shape[1]:
            raise ValueError(f"query has {q.shape[1]} frames but key/value has {kv.shape[1]}")
        qh, kh = self._split(self.query(q)), self._split(self.key(kv))
        scores = qh @ kh.transpose(-1, -2) / math.sqrt(self.head_dim)
        allowed = build_lookahead_mask(q.shape[1], self.lookahead).to(q.device)
        scores = scores.masked_fill(~allowed, MASK_FILL)
        return scores.softmax(dim=-1)

    def forward(self, q: torch.Tensor, kv: torch.Tensor) -> torch.Tensor:
        attn = self.weights(q, kv)
        ctx = attn @ self._split(self.value(kv))
        b, _, t, _ = ctx.shape
        return self.out(ctx.transpose(1, 2).reshape(b, t, -1))


class Conditioner(nn.Module):
    """Fuses generator latents ``g_l`` with frozen-model latents ``d_l``.

    ``d_l`` is linearly projected to the generator latent width, attended to
    with ``g_l`` as queries, and the result is appended to ``g_l``.
    """

    def __init__(self, cfg: AttentionConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or AttentionConfig()
        self.project = nn.Linear(cfg.latent_dim, cfg.model_dim)
        self.attention = MaskedMultiHeadAttention(cfg.model_dim, cfg.heads, cfg.lookahead)

    def project_latents(self, d_l: torch.Tensor) -> torch.Tensor:
        return self.project(d_l)

    def forward(self, g_l: torch.Tensor, d_l: torch.Tensor) -> torch.Tensor:
        if g_l.shape[:2] != d_l.shape[:2]:
            raise ValueError(f"frame mismatch: g_l {tuple(g_l.shape)} vs d_l {tuple(d_l.shape)}")
        g_dl = self.attention(g_l, self.project_latents(d_l))
        return torch.cat([g_l, g_dl], dim=-1)

    def condition(self, g_l: torch.Tensor, d_l: torch.Tensor) -> torch.Tensor:
        return self(g_l, d_l)
