import numpy as np
import pytest
import torch

from discogan import datagen, synth
from discogan.dsp import AudioClip


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


def toy_pairs(count, duration=0.5, snr=-5.0, seed=0):
    """Rendered (x, s) pairs from synthetic harmonic speech and shaped noise."""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        clean = AudioClip(synth.harmonic_speech(duration, rng))
        noise = AudioClip(synth.speech_shaped_noise(duration, rng))
        spec = datagen.MixtureSpec("clean", "noise", snr, duration, seed * 1000 + i)
        pairs.append(datagen.make_mixture(spec, clean, noise))
    return pairs


@pytest.fixture(scope="session")
def sources(tmp_path_factory):
    root = tmp_path_factory.mktemp("sources")
    return synth.write_sources(root, n_clean=4, n_noise=3, n_rir=2, duration=2.0, seed=7)


_CRITERIA: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    if report.failed:
        _CRITERIA[number] = ("FAIL", title, detail or report.when + " failed")
    elif report.when == "call" and report.passed:
        _CRITERIA[number] = ("PASS", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2} {status}: {title}" + (f" ({detail})" if detail else ""))
