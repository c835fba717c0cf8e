import math

import numpy as np
import pytest

from discogan import datagen, metrics


def test_snr_examples():
    assert metrics.snr([1.0, 1.0], [1.0, 0.0]) == pytest.approx(10 * math.log10(2), abs=1e-12)
    assert metrics.snr([1.0, 2.0], [1.0, 2.0]) == 100.0
    with pytest.raises(ValueError):
        metrics.snr([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        metrics.snr([1.0], [1.0, 0.0])


def test_si_sdr_examples():
    assert metrics.si_sdr([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.0, abs=1e-12)
    assert metrics.si_sdr([1.0, 2.0], [2.0, 1.0]) == pytest.approx(10 * math.log10(3.2 / 1.8), abs=1e-9)
    assert metrics.si_sdr([1.0, 2.0], [2.0, 4.0]) == 100.0


def test_delta_snr():
    s, x = np.array([1.0, 1.0]), np.array([1.0, 0.0])
    assert metrics.delta_snr(s, x, x) == 0.0
    assert metrics.delta_snr(s, x, s) == pytest.approx(100 - 10 * math.log10(2))


def test_seg_snr_two_frames():
    s = np.array([1.0, 1.0, 2.0, 2.0])
    e = np.array([1.0, 0.0, 2.0, 2.0])
    # frame 1: 10 log10(2/1); frame 2: exact, capped at 35
    assert metrics.seg_snr(s, e, frame=2) == pytest.approx((10 * math.log10(2) + 35) / 2, abs=1e-12)


def test_seg_snr_clamps_and_skips_silence():
    s = np.array([1.0, 1.0, 0.0, 0.0, 1.0, -1.0])
    e = np.array([-3.0, -3.0, 5.0, 5.0, -1.0, 1.0])
    # frame 1: 10 log10(2/32) -> floor; silent frame 2 ignored; frame 3: 10 log10(2/8)
    expected = (-10.0 + 10 * math.log10(2 / 8)) / 2
    assert metrics.seg_snr(s, e, frame=2) == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ValueError, match="active"):
        metrics.seg_snr(np.zeros(4), np.ones(4), frame=2)
    with pytest.raises(ValueError):
        metrics.seg_snr(s, e, frame=0)


def test_fw_band_snr_one_frame():
    bands = np.array([[1.0, 2.0]])
    hat = np.array([[0.5, 2.0]])
    w = np.array([1.0, 2.0**0.2])
    expected = (w[0] * 10 * math.log10(1 / 0.25) + w[1] * 35.0) / w.sum()
    assert metrics.fw_band_snr(bands, hat)[0] == pytest.approx(expected, abs=1e-12)


def test_fw_band_snr_floor_and_two_frames():
    bands = np.array([[1.0, 1.0], [3.0, 0.0]])
    hat = np.array([[10.0, 1.0], [3.0, 1.0]])
    out = metrics.fw_band_snr(bands, hat)
    # frame 1: band 1 floored at -10, band 2 exact; frame 2: silent band 2 has zero weight
    assert out[0] == pytest.approx((-10 + 35) / 2, abs=1e-12)
    assert out[1] == pytest.approx(35.0, abs=1e-12)


def test_fw_seg_snr_identity_and_noise(rng):
    s = rng.standard_normal(4000)
    assert metrics.fw_seg_snr(s, s) == pytest.approx(35.0)
    noisy = s + rng.standard_normal(4000)
    assert -10 <= metrics.fw_seg_snr(s, noisy) < 35
    assert metrics.fw_seg_snr(s, s + 0.1 * rng.standard_normal(4000)) > metrics.fw_seg_snr(s, noisy)


def test_band_matrix_rows_nonempty():
    fb = metrics._band_matrix(metrics.FwSegConfig())
    assert fb.shape == (25, 257)
    assert (fb.sum(axis=1) > 0).all()


def render_eval(sources, tmp_path, count=8):
    recipe = datagen.Recipe(count, duration=0.5, snr_range=(-20.0, 0.0), reverb_fraction=0.0, seed=2, split="eval")
    manifest = datagen.build_manifest(sources["clean"], sources["noise"], None, recipe)
    datagen.render_manifest(manifest, sources["clean"], sources["noise"], None, tmp_path)
    return tmp_path / "manifest.jsonl"


def test_identity_enhancer_report(sources, tmp_path):
    path = render_eval(sources, tmp_path)
    report = metrics.evaluate_dataset(path, lambda x: x, tmp_path / "r.json")
    assert report.failures == 0 and len(report.rows) == 8
    for b in report.buckets.values():
        assert abs(b["delta_snr"]) < 0.01
        assert abs(b["delta_si_sdr"]) < 1e-9
    assert sum(b["count"] for b in report.buckets.values()) == 8
    again = metrics.MetricReport.load(tmp_path / "r.json")
    assert again.buckets == report.buckets
    assert "bucket" in report.table()


def test_failing_rows_are_recorded(sources, tmp_path):
    path = render_eval(sources, tmp_path, count=4)
    calls = []

    def flaky(x):
        calls.append(1)
        if len(calls) == 2:
            raise RuntimeError("boom")
        return x

    report = metrics.evaluate_dataset(path, flaky)
    assert report.failures == 1
    assert sum(r["error"] is not None for r in report.rows) == 1
    assert sum(b["count"] for b in report.buckets.values()) == 3
