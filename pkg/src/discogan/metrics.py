"""SNR-family objective metrics and SNR-bucketed evaluation reports."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .datagen import BUCKET_LABELS, DatasetManifest, bucket_of_snr
from .disc_model import si_sdr as _si_sdr_torch
from .dsp import SAMPLE_RATE, _hz_to_mel, _mel_to_hz, read_wav

log = logging.getLogger(__name__)

SNR_CAP = 100.0
SEG_FLOOR, SEG_CEIL = -10.0, 35.0
ACTIVE_DBFS = -60.0
FW_BANDS = 25
FW_GAMMA = 0.2


def _pair(reference, estimate):
    s = np.asarray(getattr(reference, "samples", reference), dtype=np.float64)
    e = np.asarray(getattr(estimate, "samples", estimate), dtype=np.float64)
    if s.shape != e.shape:
        raise ValueError(f"length mismatch {s.shape} vs {e.shape}")
    return s, e


def snr(reference, estimate) -> float:
    s, e = _pair(reference, estimate)
    sig = np.sum(s * s)
    if sig <= 0:
        raise ValueError("SNR is undefined for a silent reference")
    err = np.sum((s - e) ** 2)
    if err == 0:
        return SNR_CAP
    return float(np.clip(10.0 * np.log10(sig / err), -SNR_CAP, SNR_CAP))


def si_sdr(reference, estimate) -> float:
    s, e = _pair(reference, estimate)
    return float(_si_sdr_torch(torch.from_numpy(s), torch.from_numpy(e)))


def delta_snr(s, x, s_hat) -> float:
    return snr(s, s_hat) - snr(s, x)


def _frame_snr(sig: np.ndarray, err: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = 10.0 * np.log10(sig / err)
    raw = np.where(err == 0, SEG_CEIL, raw)
    return np.clip(raw, SEG_FLOOR, SEG_CEIL)


def _active(frames: np.ndarray) -> np.ndarray:
    energy = np.mean(frames * frames, axis=-1)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy) > ACTIVE_DBFS


def seg_snr(reference, estimate, frame: int = 400) -> float:
    """Mean clamped SNR over non-overlapping frames with active reference."""
    if frame <= 0:
        raise ValueError("frame length must be positive")
    s, e = _pair(reference, estimate)
    n = len(s) // frame
    sf = s[: n * frame].reshape(n, frame)
    ef = e[: n * frame].reshape(n, frame)
    active = _active(sf)
    if not active.any():
        raise ValueError("no active frames in the reference")
    values = _frame_snr(np.sum(sf * sf, axis=1), np.sum((sf - ef) ** 2, axis=1))
    return float(np.mean(values[active]))


def fw_band_snr(bands: np.ndarray, bands_hat: np.ndarray, gamma: float = FW_GAMMA) -> np.ndarray:
    """Per-frame weighted band SNR from ``(frames, bands)`` magnitude arrays."""
    bands = np.asarray(bands, dtype=np.float64)
    bands_hat = np.asarray(bands_hat, dtype=np.float64)
    per_band = _frame_snr(bands**2, (bands - bands_hat) ** 2)
    weights = bands**gamma
    wsum = weights.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (weights * per_band).sum(axis=-1) / wsum
    return np.where(wsum > 0, out, SEG_CEIL)


@dataclass(frozen=True)
class FwSegConfig:
    frame: int = 400  # 25 ms at 16 kHz
    hop: int = 240  # 40 % overlap
    n_fft: int = 512
    bands: int = FW_BANDS
    sample_rate: int = SAMPLE_RATE


def _band_matrix(cfg: FwSegConfig) -> np.ndarray:
    n_bins = cfg.n_fft // 2 + 1
    freqs = np.arange(n_bins) * cfg.sample_rate / cfg.n_fft
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(cfg.sample_rate / 2), cfg.bands + 2))
    fb = np.zeros((cfg.bands, n_bins))
    for j in range(cfg.bands):
        lo, mid, hi = edges[j], edges[j + 1], edges[j + 2]
        fb[j] = np.clip(np.minimum((freqs - lo) / (mid - lo), (hi - freqs) / (hi - mid)), 0.0, None)
        if not fb[j].any():
            fb[j, int(np.argmin(np.abs(freqs - mid)))] = 1.0
    return fb


def _frames(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    if len(x) < frame:
        x = np.pad(x, (0, frame - len(x)))
    n = 1 + (len(x) - frame) // hop
    idx = np.arange(frame)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def fw_seg_snr(reference, estimate, cfg: FwSegConfig = FwSegConfig()) -> float:
    """Frequency-weighted segmental SNR over Mel-spaced bands."""
    s, e = _pair(reference, estimate)
    sf, ef = _frames(s, cfg.frame, cfg.hop), _frames(e, cfg.frame, cfg.hop)
    active = _active(sf)
    if not active.any():
        raise ValueError("no active frames in the reference")
    window = np.hanning(cfg.frame + 2)[1:-1]
    fb = _band_matrix(cfg)
    spec_s = np.abs(np.fft.rfft(sf * window, cfg.n_fft)) @ fb.T
    spec_e = np.abs(np.fft.rfft(ef * window, cfg.n_fft)) @ fb.T
    return float(np.mean(fw_band_snr(spec_s, spec_e)[active]))


METRIC_COLUMNS = (
    "snr_out",
    "delta_snr",
    "si_sdr",
    "delta_si_sdr",
    "seg_snr",
    "fw_seg_snr",
    "delta_fw_seg_snr",
)


@dataclass
class MetricReport:
    rows: list[dict] = field(default_factory=list)
    buckets: dict[str, dict] = field(default_factory=dict)
    failures: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "MetricReport":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

    def table(self, columns=("delta_snr", "si_sdr", "seg_snr", "fw_seg_snr")) -> str:
        head = f"{'bucket':<11}{'n':>4}" + "".join(f"{c:>13}" for c in columns)
        lines = [head]
        for label in BUCKET_LABELS:
            b = self.buckets.get(label)
            if not b:
                continue
            lines.append(f"{label:<11}{b['count']:>4}" + "".join(f"{b[c]:>13.3f}" for c in columns))
        return "\n".join(lines)


def clip_metrics(s: np.ndarray, x: np.ndarray, s_hat: np.ndarray) -> dict:
    fw_in, fw_out = fw_seg_snr(s, x), fw_seg_snr(s, s_hat)
    sdr_in, sdr_out = si_sdr(s, x), si_sdr(s, s_hat)
    snr_out = snr(s, s_hat)
    return {
        "snr_out": snr_out,
        "delta_snr": snr_out - snr(s, x),
        "si_sdr": sdr_out,
        "delta_si_sdr": sdr_out - sdr_in,
        "seg_snr": seg_snr(s, s_hat),
        "fw_seg_snr": fw_out,
        "delta_fw_seg_snr": fw_out - fw_in,
    }


def aggregate(rows: list[dict]) -> dict[str, dict]:
    buckets = {}
    for label in BUCKET_LABELS:
        members = [r for r in rows if r["bucket"] == label and r.get("error") is None]
        if members:
            summary = {c: float(np.mean([r[c] for r in members])) for c in METRIC_COLUMNS}
            summary["count"] = len(members)
            buckets[label] = summary
    return buckets


def evaluate_dataset(manifest_path, enhancer, out_path=None) -> MetricReport:
    """Enhance every rendered item of an eval manifest and score it per SNR bucket.

    ``enhancer`` maps a noisy float64 array to an enhanced array of the same
    length.  A failing clip becomes an error row and is left out of the means.
    """
    manifest_path = Path(manifest_path)
    manifest = DatasetManifest.load(manifest_path)
    root = manifest_path.parent
    rows, failures = [], 0
    for i, spec in enumerate(manifest.entries):
        clip_id = spec.x_path or f"item{i}"
        row = {"clip_id": clip_id, "input_snr": spec.target_snr, "bucket": bucket_of_snr(spec.target_snr), "error": None}
        try:
            x = read_wav(root / spec.x_path).samples
            s = read_wav(root / spec.s_path).samples
            s_hat = np.asarray(enhancer(x), dtype=np.float64)
            row.update(clip_metrics(s, x, s_hat))
        except Exception as exc:  # noqa: BLE001 - row-level failures are reported, not raised
            log.warning("evaluation failed on %s: %s", clip_id, exc)
            row["error"] = f"{type(exc).__name__}: {exc}"
            failures += 1
        rows.append(row)
    report = MetricReport(rows, aggregate(rows), failures)
    if out_path is not None:
        report.save(out_path)
    return report
