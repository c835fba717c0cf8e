"""STFT analysis/synthesis, the compressed TF image, and loss spectra.

All transforms use a periodic Hann window with centered (reflect) padding, so
a clip of ``n`` samples yields ``1 + n // hop`` frames.  Spectrograms are laid
out ``(..., time, frequency)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import torch
from scipy.io import wavfile

SAMPLE_RATE = 16000
WINDOW_SIZE = 512
HOP = 160
FREQ_USED = 256
LOG_EPS = 1e-5


@dataclass
class AudioClip:
    """Mono time-domain signal."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 1:
            raise ValueError(f"expected mono audio, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio contains non-finite samples")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, AudioClip):
        x = x.samples
    if isinstance(x, np.ndarray):
        return torch.from_numpy(np.ascontiguousarray(x))
    return x


@lru_cache(maxsize=None)
def _hann(window_size: int, dtype: torch.dtype) -> torch.Tensor:
    return torch.hann_window(window_size, periodic=True, dtype=dtype)


def num_frames(length: int, hop: int) -> int:
    return 1 + length // hop


def stft(x, window_size: int = WINDOW_SIZE, hop: int = HOP) -> torch.Tensor:
    """Complex spectrogram of shape ``(..., T, window_size // 2 + 1)``."""
    x = _as_tensor(x)
    if window_size % 2:
        raise ValueError("window_size must be even")
    if hop <= 0 or hop > window_size:
        raise ValueError(f"hop must lie in (0, window_size], got {hop}")
    n = x.shape[-1]
    if n == 0:
        raise ValueError("cannot analyse an empty clip")
    if not x.is_floating_point():
        x = x.to(torch.get_default_dtype())
    lead = x.shape[:-1]
    flat = x.reshape(-1, 1, n)
    pad = window_size // 2
    # reflect padding needs more samples than the pad width
    mode = "reflect" if n > pad else "constant"
    flat = torch.nn.functional.pad(flat, (pad, pad), mode=mode).squeeze(1)
    spec = torch.stft(
        flat,
        n_fft=window_size,
        hop_length=hop,
        window=_hann(window_size, flat.dtype),
        center=False,
        return_complex=True,
    )
    return spec.transpose(-1, -2).reshape(*lead, spec.shape[-1], spec.shape[-2])


@lru_cache(maxsize=256)
def _nola_ok(window_size: int, hop: int, frames: int, length: int) -> bool:
    # squared-window envelope over the retained region; zero means the inverse is undefined
    window = _hann(window_size, torch.float64)
    env = torch.zeros(window_size + hop * (frames - 1), dtype=torch.float64)
    for t in range(frames):
        env[t * hop : t * hop + window_size] += window**2
    keep = env[window_size // 2 : window_size // 2 + length]
    return bool(keep.numel() == 0 or keep.min() >= 1e-11)


def istft(spec: torch.Tensor, length: int, window_size: int = WINDOW_SIZE, hop: int = HOP) -> torch.Tensor:
    """Overlap-add inverse of :func:`stft`, trimmed or zero-padded to ``length``."""
    spec = _as_tensor(spec)
    freq = spec.shape[-1]
    if freq != window_size // 2 + 1:
        raise ValueError(f"spectrogram has {freq} bins, expected {window_size // 2 + 1}")
    lead = spec.shape[:-2]
    flat = spec.reshape(-1, *spec.shape[-2:]).transpose(-1, -2)
    window = _hann(window_size, flat.real.dtype)
    if not _nola_ok(window_size, hop, flat.shape[-1], length):
        raise ValueError("window/hop pair leaves a zero normalization denominator")
    out = torch.istft(
        flat,
        n_fft=window_size,
        hop_length=hop,
        window=window,
        center=True,
        length=length,
    )
    return out.reshape(*lead, length)


def compress_tf(spec: torch.Tensor) -> torch.Tensor:
    """Two-channel generator input: ``log(1 + |X|)`` and ``angle(X) / pi``.

    The Nyquist bin is dropped so the frequency axis has 256 bins.
    """
    if spec.shape[-1] != FREQ_USED + 1:
        raise ValueError(f"expected {FREQ_USED + 1} frequency bins, got {spec.shape[-1]}")
    spec = spec[..., :FREQ_USED]
    mag = torch.log1p(spec.abs())
    phase = torch.angle(spec) / math.pi
    return torch.stack([mag, phase], dim=-3)


def decompress_tf(img: torch.Tensor) -> torch.Tensor:
    """Complex spectrogram from a (magnitude, cos, sin) image; Nyquist row is zero."""
    if img.shape[-3] != 3:
        raise ValueError(f"expected 3 channels, got {img.shape[-3]}")
    if not torch.isfinite(img).all():
        raise ValueError("non-finite values in generator output")
    m, pc, ps = img.unbind(dim=-3)
    mag = torch.relu(torch.expm1(m))
    phase = torch.atan2(ps, pc)
    spec = torch.polar(mag, phase)
    nyquist = torch.zeros_like(spec[..., :1])
    return torch.cat([spec, nyquist], dim=-1)


def log_power_spectrogram(x, window_size: int) -> torch.Tensor:
    if window_size < 4:
        raise ValueError("window must be at least 4 samples")
    spec = stft(x, window_size, window_size // 4)
    return torch.log(spec.real**2 + spec.imag**2 + LOG_EPS)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=None)
def _mel_filterbank_np(n_mels: int, window_size: int, sample_rate: int) -> np.ndarray:
    n_bins = window_size // 2 + 1
    nyquist = sample_rate / 2
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(nyquist), n_mels + 2))
    df = sample_rate / window_size
    # each FFT bin is treated as a rectangle of width df; the filter weight is the
    # mean of the triangle over that rectangle, so narrow low bands never vanish
    grid = 64
    offsets = (np.arange(grid) + 0.5) / grid - 0.5
    freqs = np.clip(np.arange(n_bins)[:, None] * df + offsets[None, :] * df, 0.0, nyquist)
    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        tri = np.clip(np.minimum(up, down), 0.0, None)
        fb[m] = tri.mean(axis=1)
    return fb


def mel_filterbank(n_mels: int, window_size: int, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular HTK-scale filterbank, ``(n_mels, window_size // 2 + 1)``."""
    if n_mels > window_size // 2:
        raise ValueError(f"{n_mels} mel bands is too many for a {window_size}-sample window")
    return _mel_filterbank_np(n_mels, window_size, sample_rate).copy()


def mel_energies(x, window_size: int, n_mels: int, sample_rate: int = SAMPLE_RATE) -> torch.Tensor:
    spec = stft(x, window_size, window_size // 4).abs()
    fb = torch.from_numpy(mel_filterbank(n_mels, window_size, sample_rate)).to(spec.dtype)
    return spec @ fb.T


def mel_spectrogram(x, window_size: int, n_mels: int, sample_rate: int = SAMPLE_RATE) -> torch.Tensor:
    return torch.log(mel_energies(x, window_size, n_mels, sample_rate) + LOG_EPS)


def read_wav(path, sample_rate: int | None = SAMPLE_RATE) -> AudioClip:
    rate, data = wavfile.read(Path(path))
    if data.ndim != 1:
        raise ValueError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if sample_rate is not None and rate != sample_rate:
        raise ValueError(f"{path}: sample rate {rate} Hz, expected {sample_rate} Hz")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported sample format {data.dtype}")
    return AudioClip(samples, rate)


def write_wav(path, clip: AudioClip, pcm16: bool = False) -> None:
    """Write a mono WAV.  Samples outside [-1, 1] raise instead of saturating."""
    samples = np.asarray(clip.samples, dtype=np.float64)
    peak = np.max(np.abs(samples)) if samples.size else 0.0
    if peak > 1.0:
        raise ValueError(f"{path}: peak amplitude {peak:.4f} would clip")
    if pcm16:
        data = np.clip(np.round(samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        data = samples.astype(np.float32)
    wavfile.write(Path(path), clip.sample_rate, data)
