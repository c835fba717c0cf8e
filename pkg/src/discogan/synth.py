"""Synthetic source material for desk-scale experiments.

Harmonic tone complexes with syllable-rate envelopes stand in for speech,
spectrally tilted noise stands in for speech-shaped noise, and exponentially
decaying noise bursts stand in for room impulse responses.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import signal

from .dsp import SAMPLE_RATE, AudioClip, write_wav


def harmonic_speech(duration: float, rng: np.random.Generator, sr: int = SAMPLE_RATE) -> np.ndarray:
    n = int(round(duration * sr))
    t = np.arange(n) / sr
    f0 = rng.uniform(100.0, 240.0)
    vibrato = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(2.0, 5.0) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * f0 * np.cumsum(vibrato) / sr
    out = np.zeros(n)
    for k in range(1, 16):
        if k * f0 * 1.03 >= sr / 2:
            break
        out += rng.uniform(0.3, 1.0) / k * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    rate = rng.uniform(3.0, 5.0)
    envelope = 0.55 + 0.45 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
    out *= envelope
    return 0.3 * out / np.max(np.abs(out))


def speech_shaped_noise(duration: float, rng: np.random.Generator, sr: int = SAMPLE_RATE) -> np.ndarray:
    n = int(round(duration * sr))
    white = rng.standard_normal(n)
    b, a = signal.butter(2, [rng.uniform(200.0, 500.0), rng.uniform(2500.0, 5000.0)], btype="band", fs=sr)
    shaped = signal.lfilter(b, a, white) + 0.05 * white
    return 0.3 * shaped / np.max(np.abs(shaped))


def synthetic_rir(rng: np.random.Generator, sr: int = SAMPLE_RATE) -> np.ndarray:
    rt60 = rng.uniform(0.3, 1.5)
    n = int(rt60 * sr)
    t = np.arange(n) / sr
    tail = rng.standard_normal(n) * np.exp(-6.9 * t / rt60) * 0.3
    tail[0] = 1.0
    return tail / np.max(np.abs(tail))


def write_sources(out_dir, n_clean: int = 8, n_noise: int = 4, n_rir: int = 0, duration: float = 4.0, seed: int = 0) -> dict:
    """Write ``clean/``, ``noise/`` and optionally ``rir/`` WAV folders."""
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    dirs = {"clean": out / "clean", "noise": out / "noise"}
    if n_rir:
        dirs["rir"] = out / "rir"
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    for i in range(n_clean):
        write_wav(dirs["clean"] / f"clean_{i:03d}.wav", AudioClip(harmonic_speech(duration, rng)))
    for i in range(n_noise):
        write_wav(dirs["noise"] / f"noise_{i:03d}.wav", AudioClip(speech_shaped_noise(duration, rng)))
    for i in range(n_rir):
        write_wav(dirs["rir"] / f"rir_{i:03d}.wav", AudioClip(synthetic_rir(rng)))
    return dirs
