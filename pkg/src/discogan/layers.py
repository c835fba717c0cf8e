"""Convolution building blocks on ``(batch, channels, time, freq)`` maps."""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F


class ChannelNorm(nn.LayerNorm):
    """LayerNorm over the channel axis at every (time, freq) position.

    Normalising per position keeps frames independent, so the time receptive
    field of a network is set by its kernels alone.
    """

    def forward(self, x):
        return super().forward(x.movedim(1, -1)).movedim(-1, 1)


class FreqDown(nn.Conv2d):
    """Strided conv halving the frequency axis; time padding is causal."""

    def __init__(self, cin, cout, kernel=(2, 4)):
        super().__init__(cin, cout, kernel, stride=(1, 2))
        kt, kf = kernel
        self._pad = ((kf - 2) // 2, (kf - 2) - (kf - 2) // 2, kt - 1, 0)

    def forward(self, x):
        return super().forward(F.pad(x, self._pad))


class FreqUp(nn.ConvTranspose2d):
    """Transposed conv doubling the frequency axis, cropped to keep the frame count."""

    def __init__(self, cin, cout, kernel=(2, 4)):
        kt, kf = kernel
        super().__init__(cin, cout, kernel, stride=(1, 2), padding=(0, (kf - 2) // 2))

    def forward(self, x):
        frames, bins = x.shape[-2], x.shape[-1]
        return super().forward(x)[..., :frames, : 2 * bins]


def same_conv(cin, cout, kernel, dilation=(1, 1), stride=(1, 1)) -> nn.Conv2d:
    padding = tuple((k - 1) * d // 2 for k, d in zip(kernel, dilation))
    return nn.Conv2d(cin, cout, kernel, stride=stride, dilation=dilation, padding=padding)
