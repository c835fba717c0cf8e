"""Noisy/clean pair synthesis at exact SNRs, manifests, and SNR buckets."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .dsp import SAMPLE_RATE, AudioClip, read_wav, write_wav

# (label, lower inclusive, upper exclusive); the top bucket also includes 0 dB
EVAL_BUCKETS = (
    ("[-20,-16]", -20.0, -15.0),
    ("[-15,-11]", -15.0, -10.0),
    ("[-10,-6]", -10.0, -5.0),
    ("[-5,0]", -5.0, 0.0),
)
BUCKET_LABELS = tuple(b[0] for b in EVAL_BUCKETS)
PEAK_LIMIT = 0.99


@dataclass
class MixtureSpec:
    clean_id: str
    noise_id: str
    target_snr: float
    duration: float
    seed: int
    rir_id: str | None = None
    split: str = "train"
    x_path: str | None = None
    s_path: str | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")


@dataclass
class Recipe:
    count: int
    duration: float = 3.0
    snr_range: tuple[float, float] = (-25.0, 0.0)
    reverb_fraction: float = 0.5
    seed: int = 0
    split: str = "train"

    @classmethod
    def eval_default(cls, count: int = 900, seed: int = 0) -> "Recipe":
        return cls(count, duration=10.0, snr_range=(-20.0, 0.0), reverb_fraction=0.0, seed=seed, split="eval")


@dataclass
class DatasetManifest:
    entries: list[MixtureSpec] = field(default_factory=list)
    split: str = "train"
    bucket_edges: tuple = EVAL_BUCKETS

    def __len__(self):
        return len(self.entries)

    def save(self, path) -> None:
        lines = [json.dumps(asdict(e), sort_keys=True) for e in self.entries]
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        entries = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                entries.append(MixtureSpec(**json.loads(line)))
        split = entries[0].split if entries else "train"
        return cls(entries, split)


def power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x, dtype=np.float64)))


def scale_noise_for_snr(clean, noise, target_snr: float) -> float:
    """Gain for ``noise`` so that ``clean + gain * noise`` sits at ``target_snr`` dB."""
    clean = np.asarray(getattr(clean, "samples", clean), dtype=np.float64)
    noise = np.asarray(getattr(noise, "samples", noise), dtype=np.float64)
    n = min(len(clean), len(noise))
    p_clean, p_noise = power(clean[:n]), power(noise[:n])
    if p_clean <= 0.0 or p_noise <= 0.0:
        raise ValueError("SNR is undefined for a silent clean or noise signal")
    return math.sqrt(p_clean / (p_noise * 10.0 ** (target_snr / 10.0)))


def _crop(x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    start = int(rng.integers(0, len(x) - n + 1))
    return x[start : start + n]


def _loop(x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    if len(x) >= n:
        return _crop(x, n, rng)
    offset = int(rng.integers(0, len(x)))
    return x[(offset + np.arange(n)) % len(x)]


def make_mixture(
    spec: MixtureSpec,
    clean: AudioClip,
    noise: AudioClip,
    rir: AudioClip | None = None,
    anechoic_target: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Render one ``(x, s)`` pair.  Deterministic given ``spec.seed``.

    The SNR is set against the (possibly reverberant) speech.  Both speech and
    noise are scaled down together when the mixture would exceed the peak
    limit, which leaves the SNR untouched.
    """
    sr = clean.sample_rate
    n = int(round(spec.duration * sr))
    if len(clean) < n:
        raise ValueError(f"clean source {spec.clean_id!r} is shorter than {spec.duration} s")
    if len(noise) == 0:
        raise ValueError(f"noise source {spec.noise_id!r} is empty")
    rng = np.random.default_rng(spec.seed)
    dry = _crop(np.asarray(clean.samples, dtype=np.float64), n, rng)
    noise_seg = _loop(np.asarray(noise.samples, dtype=np.float64), n, rng)
    speech = dry
    if rir is not None:
        speech = signal.convolve(dry, np.asarray(rir.samples, dtype=np.float64))[:n]
    gain = scale_noise_for_snr(speech, noise_seg, spec.target_snr)
    scaled_noise = gain * noise_seg
    peak = np.max(np.abs(speech + scaled_noise))
    level = PEAK_LIMIT / peak if peak > PEAK_LIMIT else 1.0
    s = level * speech
    x = s + level * scaled_noise
    if anechoic_target:
        s = level * dry
    return x, s


def bucket_of_snr(snr: float) -> str:
    if not -20.0 <= snr <= 0.0:
        raise ValueError(f"SNR {snr} dB lies outside the evaluation range [-20, 0]")
    for label, lo, hi in EVAL_BUCKETS:
        if lo <= snr < hi:
            return label
    return EVAL_BUCKETS[-1][0]


def list_wavs(directory) -> list[str]:
    if directory is None:
        return []
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a directory")
    return sorted(str(p.relative_to(root)) for p in root.rglob("*.wav"))


def build_manifest(clean_dir, noise_dir, rir_dir, recipe: Recipe) -> DatasetManifest:
    if recipe.count < 0:
        raise ValueError("count must be non-negative")
    if not 0.0 <= recipe.reverb_fraction <= 1.0:
        raise ValueError("reverb_fraction must lie in [0, 1]")
    cleans, noises = list_wavs(clean_dir), list_wavs(noise_dir)
    rirs = list_wavs(rir_dir) if rir_dir is not None else []
    if recipe.count == 0:
        return DatasetManifest([], recipe.split)
    if not cleans:
        raise ValueError(f"no clean WAV files under {clean_dir}")
    if not noises:
        raise ValueError(f"no noise WAV files under {noise_dir}")
    n_reverb = int(round(recipe.count * recipe.reverb_fraction))
    if n_reverb and not rirs:
        raise ValueError("reverb_fraction > 0 needs a non-empty RIR directory")

    rng = np.random.default_rng(recipe.seed)
    lo, hi = recipe.snr_range
    snrs = rng.uniform(lo, hi, recipe.count)
    clean_idx = rng.integers(0, len(cleans), recipe.count)
    noise_idx = rng.integers(0, len(noises), recipe.count)
    reverb = set(rng.permutation(recipe.count)[:n_reverb].tolist())
    rir_idx = rng.integers(0, max(len(rirs), 1), recipe.count)
    seeds = rng.integers(0, 2**31 - 1, recipe.count)
    entries = [
        MixtureSpec(
            clean_id=cleans[clean_idx[i]],
            noise_id=noises[noise_idx[i]],
            target_snr=float(snrs[i]),
            duration=recipe.duration,
            seed=int(seeds[i]),
            rir_id=rirs[rir_idx[i]] if i in reverb else None,
            split=recipe.split,
        )
        for i in range(recipe.count)
    ]
    return DatasetManifest(entries, recipe.split)


def render_manifest(
    manifest: DatasetManifest,
    clean_dir,
    noise_dir,
    rir_dir,
    out_dir,
    anechoic_target: bool = False,
    sample_rate: int = SAMPLE_RATE,
) -> DatasetManifest:
    """Write ``x``/``s`` WAV pairs under ``out_dir`` and record their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache: dict[Path, AudioClip] = {}

    def load(root, rel):
        path = Path(root) / rel
        if path not in cache:
            if not path.exists():
                raise FileNotFoundError(f"missing source file {path}")
            cache[path] = read_wav(path, sample_rate)
        return cache[path]

    width = max(4, len(str(len(manifest))))
    for i, spec in enumerate(manifest.entries):
        rir = load(rir_dir, spec.rir_id) if spec.rir_id else None
        x, s = make_mixture(spec, load(clean_dir, spec.clean_id), load(noise_dir, spec.noise_id), rir, anechoic_target)
        stem = f"{manifest.split}_{i:0{width}d}"
        spec.x_path, spec.s_path = f"{stem}_noisy.wav", f"{stem}_clean.wav"
        write_wav(out / spec.x_path, AudioClip(x, sample_rate))
        write_wav(out / spec.s_path, AudioClip(s, sample_rate))
    manifest.save(out / "manifest.jsonl")
    return manifest


def load_pairs(manifest_path) -> list[tuple[np.ndarray, np.ndarray]]:
    """Rendered ``(x, s)`` arrays for every manifest entry, in manifest order."""
    manifest_path = Path(manifest_path)
    manifest = DatasetManifest.load(manifest_path)
    root = manifest_path.parent
    pairs = []
    for spec in manifest.entries:
        if spec.x_path is None or spec.s_path is None:
            raise ValueError(f"manifest entry for {spec.clean_id!r} has not been rendered")
        pairs.append((read_wav(root / spec.x_path).samples, read_wav(root / spec.s_path).samples))
    return pairs
