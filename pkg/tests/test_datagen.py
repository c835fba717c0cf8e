import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discogan import datagen
from discogan.dsp import AudioClip


def measured_snr(x, s):
    n = x - s
    return 10 * np.log10(np.sum(s**2) / np.sum(n**2))


def test_scale_noise_for_snr_examples():
    clean = np.ones(100)
    noise = np.ones(100)
    assert datagen.scale_noise_for_snr(clean, noise, 0.0) == pytest.approx(1.0)
    assert datagen.scale_noise_for_snr(clean, noise, 20.0) == pytest.approx(0.1)
    assert datagen.scale_noise_for_snr(clean, 2 * noise, -20.0) == pytest.approx(5.0)


def test_scale_noise_rejects_silence():
    with pytest.raises(ValueError):
        datagen.scale_noise_for_snr(np.zeros(10), np.ones(10), 0.0)
    with pytest.raises(ValueError):
        datagen.scale_noise_for_snr(np.ones(10), np.zeros(10), 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-25.0, max_value=0.0), st.integers(min_value=0, max_value=10**6), st.booleans())
def test_mixture_hits_target_snr(snr, seed, loud):
    rng = np.random.default_rng(seed)
    amp = 5.0 if loud else 0.1
    clean = AudioClip(np.clip(amp * rng.standard_normal(4000), -50, 50))
    noise = AudioClip(amp * rng.standard_normal(1500))
    spec = datagen.MixtureSpec("c", "n", snr, 0.2, seed)
    x, s = datagen.make_mixture(spec, clean, noise)
    assert len(x) == len(s) == 3200
    assert abs(measured_snr(x, s) - snr) < 1e-6
    assert np.max(np.abs(x)) <= datagen.PEAK_LIMIT + 1e-12


def test_mixture_is_deterministic_and_seed_sensitive(rng):
    clean = AudioClip(rng.standard_normal(8000) * 0.1)
    noise = AudioClip(rng.standard_normal(9000) * 0.1)
    a = datagen.make_mixture(datagen.MixtureSpec("c", "n", -5.0, 0.25, 3), clean, noise)
    b = datagen.make_mixture(datagen.MixtureSpec("c", "n", -5.0, 0.25, 3), clean, noise)
    c = datagen.make_mixture(datagen.MixtureSpec("c", "n", -5.0, 0.25, 4), clean, noise)
    assert all(np.array_equal(p, q) for p, q in zip(a, b))
    assert not np.array_equal(a[0], c[0])


def test_reverberant_mixture_targets_and_snr(rng):
    clean = AudioClip(rng.standard_normal(8000) * 0.1)
    noise = AudioClip(rng.standard_normal(8000) * 0.1)
    rir = AudioClip(np.array([1.0, 0.0, 0.5, 0.25]))
    spec = datagen.MixtureSpec("c", "n", -3.0, 0.25, 1, rir_id="r")
    x, s = datagen.make_mixture(spec, clean, noise, rir)
    assert abs(measured_snr(x, s) - -3.0) < 1e-6
    x2, dry = datagen.make_mixture(spec, clean, noise, rir, anechoic_target=True)
    np.testing.assert_array_equal(x, x2)
    # reverberant target is the dry target convolved with the RIR, same level
    np.testing.assert_allclose(s, np.convolve(dry, rir.samples)[: len(dry)], atol=1e-12)


def test_mixture_errors(rng):
    clean = AudioClip(rng.standard_normal(100))
    noise = AudioClip(rng.standard_normal(100))
    with pytest.raises(ValueError, match="shorter"):
        datagen.make_mixture(datagen.MixtureSpec("c", "n", 0.0, 1.0, 0), clean, noise)
    with pytest.raises(ValueError):
        datagen.MixtureSpec("c", "n", 0.0, 0.0, 0)


def test_short_noise_is_looped(rng):
    clean = AudioClip(rng.standard_normal(1600))
    noise = AudioClip(np.arange(1, 11, dtype=float))
    x, s = datagen.make_mixture(datagen.MixtureSpec("c", "n", 0.0, 0.1, 2), clean, noise)
    residual = x - s
    np.testing.assert_allclose(residual[10:], residual[:-10], atol=1e-12)


@pytest.mark.parametrize(
    "snr,label",
    [(-20.0, "[-20,-16]"), (-15.5, "[-20,-16]"), (-15.0, "[-15,-11]"), (-10.2, "[-15,-11]"),
     (-7.0, "[-10,-6]"), (-5.0, "[-5,0]"), (0.0, "[-5,0]")],
)
def test_bucket_of_snr(snr, label):
    assert datagen.bucket_of_snr(snr) == label


@pytest.mark.parametrize("snr", [-20.01, 0.01, -25.0])
def test_bucket_out_of_range(snr):
    with pytest.raises(ValueError):
        datagen.bucket_of_snr(snr)


def test_build_manifest_reproducible(sources):
    recipe = datagen.Recipe(count=12, duration=0.5, seed=5, reverb_fraction=0.5)
    a = datagen.build_manifest(sources["clean"], sources["noise"], sources["rir"], recipe)
    b = datagen.build_manifest(sources["clean"], sources["noise"], sources["rir"], recipe)
    assert a.entries == b.entries
    assert len(a) == 12
    assert sum(e.rir_id is not None for e in a.entries) == 6
    assert all(-25.0 <= e.target_snr <= 0.0 for e in a.entries)
    other = datagen.build_manifest(sources["clean"], sources["noise"], sources["rir"], datagen.Recipe(12, 0.5, seed=6))
    assert other.entries != a.entries


def test_build_manifest_errors(sources, tmp_path):
    with pytest.raises(ValueError, match="RIR"):
        datagen.build_manifest(sources["clean"], sources["noise"], None, datagen.Recipe(4, reverb_fraction=0.5))
    with pytest.raises(FileNotFoundError):
        datagen.build_manifest(tmp_path / "nope", sources["noise"], None, datagen.Recipe(4, reverb_fraction=0.0))
    (tmp_path / "empty").mkdir()
    with pytest.raises(ValueError, match="clean"):
        datagen.build_manifest(tmp_path / "empty", sources["noise"], None, datagen.Recipe(4, reverb_fraction=0.0))
    empty = datagen.build_manifest(sources["clean"], sources["noise"], None, datagen.Recipe(0))
    assert len(empty) == 0


def test_render_and_load_round_trip(sources, tmp_path):
    recipe = datagen.Recipe(count=5, duration=0.5, snr_range=(-20.0, 0.0), reverb_fraction=0.4, seed=1, split="eval")
    manifest = datagen.build_manifest(sources["clean"], sources["noise"], sources["rir"], recipe)
    datagen.render_manifest(manifest, sources["clean"], sources["noise"], sources["rir"], tmp_path)
    lines = (tmp_path / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == 5
    assert json.loads(lines[0])["x_path"] == "eval_0000_noisy.wav"
    loaded = datagen.DatasetManifest.load(tmp_path / "manifest.jsonl")
    assert loaded.split == "eval"
    assert loaded.entries == manifest.entries
    pairs = datagen.load_pairs(tmp_path / "manifest.jsonl")
    for (x, s), spec in zip(pairs, manifest.entries):
        assert len(x) == 8000
        # float32 storage costs a little precision
        assert abs(measured_snr(x, s) - spec.target_snr) < 1e-3


def test_render_missing_source(sources, tmp_path):
    manifest = datagen.DatasetManifest([datagen.MixtureSpec("ghost.wav", "noise_000.wav", 0.0, 0.5, 0)])
    with pytest.raises(FileNotFoundError):
        datagen.render_manifest(manifest, sources["clean"], sources["noise"], None, tmp_path)


def test_load_pairs_requires_rendering(tmp_path):
    datagen.DatasetManifest([datagen.MixtureSpec("a.wav", "b.wav", 0.0, 1.0, 0)]).save(tmp_path / "m.jsonl")
    with pytest.raises(ValueError, match="rendered"):
        datagen.load_pairs(tmp_path / "m.jsonl")
