import numpy as np
import pytest
import torch

from conftest import toy_pairs
from discogan import checkpoint, trainer
from discogan.config import RunConfig, TrainConfig
from discogan.disc_model import DiscModel, freeze


@pytest.fixture(scope="module")
def pairs():
    return toy_pairs(4, duration=0.25)


def small_cfg(**train):
    cfg = RunConfig.toy(**{"batch_size": 2, "checkpoint_every": 0, **train})
    cfg.spectral_loss.exponents = (5, 6, 7, 8)
    cfg.adversary.scales = (256, 128)
    return cfg


def test_batch_sampler_covers_epoch_and_restores():
    a = trainer.BatchSampler(5, 2, seed=3)
    first = np.concatenate([a.next(), a.next()])
    assert len(set(first.tolist())) == 4
    state = a.state()
    ahead = [a.next().tolist() for _ in range(4)]
    b = trainer.BatchSampler(5, 2, seed=99)
    b.restore(state)
    assert [b.next().tolist() for _ in range(4)] == ahead
    with pytest.raises(ValueError):
        trainer.BatchSampler(0, 2, 0)
    assert trainer.BatchSampler(3, 8, 0).batch_size == 3


def test_make_batch_crops_to_shortest():
    pairs = [(np.ones(10), np.zeros(10)), (np.ones(8), np.zeros(8))]
    x, s = trainer.make_batch(pairs, [0, 1], torch.float64)
    assert x.shape == s.shape == (2, 8) and x.dtype == torch.float64


@pytest.mark.parametrize("l_disc,l_adv,expected", [(2.0, 1.0, True), (1.0, 1.0, False), (0.5, 1.0, False)])
def test_gate(l_disc, l_adv, expected):
    assert trainer.should_update_disc(l_disc, l_adv) is expected


def test_stage1_writes_checkpoint_and_log(pairs, tmp_path):
    cfg = small_cfg(stage1_iterations=4, checkpoint_every=2)
    path = trainer.train_stage1(pairs, cfg, tmp_path)
    assert path.name == "disc.ckpt" and (tmp_path / "disc_step2.ckpt").exists()
    log = trainer.read_log(tmp_path / "stage1_log.jsonl")
    assert [r["step"] for r in log] == [1, 2, 3, 4]
    blob = checkpoint.load(path, "disc")
    assert blob["train_state"]["step"] == 4
    assert blob["stft"] == {"window_size": 512, "hop": 160}


def test_stage1_resume_matches_uninterrupted(pairs, tmp_path):
    cfg = small_cfg(stage1_iterations=4, checkpoint_every=2)
    full = trainer.train_stage1(pairs, cfg, tmp_path / "full")
    trainer.train_stage1(pairs, small_cfg(stage1_iterations=2), tmp_path / "half")
    resumed = trainer.train_stage1(pairs, cfg, tmp_path / "half", resume=tmp_path / "half" / "disc.ckpt")
    a, b = checkpoint.load(full, "disc"), checkpoint.load(resumed, "disc")
    assert a["fingerprint"] == b["fingerprint"]
    assert trainer.read_log(tmp_path / "full" / "stage1_log.jsonl") == trainer.read_log(
        tmp_path / "half" / "stage1_log.jsonl"
    )


def test_stage2_step_respects_gate(pairs):
    cfg = small_cfg()
    frozen = freeze(DiscModel(cfg.disc_model))
    state = trainer.init_stage2(cfg, frozen)
    batch = trainer.make_batch(pairs, [0, 1])
    msd_before = checkpoint.fingerprint(state.msd)
    gen_before = checkpoint.fingerprint(state.gen)
    state, parts = trainer.train_stage2_step(batch, state, cfg, gate=lambda a, b: False)
    assert not state.disc_updated and state.step == 1
    assert checkpoint.fingerprint(state.msd) == msd_before
    assert checkpoint.fingerprint(state.gen) != gen_before
    assert frozen.current_fingerprint() == frozen.fingerprint
    assert parts.total == pytest.approx(parts.l_t + parts.l_f + parts.l_adv / 9 + parts.l_feat * 100 / 9)
    state, _ = trainer.train_stage2_step(batch, state, cfg, gate=lambda a, b: True)
    assert state.disc_updated and checkpoint.fingerprint(state.msd) != msd_before


def test_stage2_run_and_load(pairs, tmp_path):
    cfg = small_cfg(stage1_iterations=1, iterations=3)
    disc = trainer.train_stage1(pairs, cfg, tmp_path)
    gan = trainer.train_stage2(pairs, cfg, disc, tmp_path)
    log = trainer.read_log(tmp_path / "stage2_log.jsonl")
    assert [r["step"] for r in log] == [1, 2, 3]
    assert set(log[0]) == {"step", "l_t", "l_f", "l_adv", "l_feat", "total", "disc_updated"}
    gen, frozen, loaded = trainer.load_gan(gan)
    assert loaded.to_dict() == cfg.to_dict()
    assert frozen.fingerprint == checkpoint.load(disc, "disc")["fingerprint"]
    assert not gen.training


def test_stage2_resume_rejects_other_disc_model(pairs, tmp_path):
    cfg = small_cfg(stage1_iterations=1, iterations=1)
    disc_a = trainer.train_stage1(pairs, cfg, tmp_path / "a")
    gan = trainer.train_stage2(pairs, cfg, disc_a, tmp_path / "a")
    disc_b = trainer.train_stage1(pairs, small_cfg(stage1_iterations=1, seed=5), tmp_path / "b")
    with pytest.raises(ValueError, match="different"):
        trainer.train_stage2(pairs, cfg, disc_b, tmp_path / "c", resume=gan)


def test_non_finite_loss_names_term(pairs):
    cfg = small_cfg()
    state = trainer.init_stage2(cfg, freeze(DiscModel(cfg.disc_model)))
    x, s = trainer.make_batch(pairs, [0, 1])
    x[0, 100] = float("inf")
    with pytest.raises((FloatingPointError, ValueError)):
        trainer.train_stage2_step((x, s), state, cfg)


def test_config_round_trip(tmp_path):
    cfg = RunConfig.toy(seed=3)
    cfg.save(tmp_path / "c.ini")
    again = RunConfig.load(tmp_path / "c.ini")
    assert again.to_dict() == cfg.to_dict()
    (tmp_path / "bad.ini").write_text("[train]\nnope = 1\n")
    with pytest.raises(ValueError, match="nope"):
        RunConfig.load(tmp_path / "bad.ini")
    (tmp_path / "sec.ini").write_text("[extra]\n")
    with pytest.raises(ValueError, match="extra"):
        RunConfig.load(tmp_path / "sec.ini")
    with pytest.raises(FileNotFoundError):
        RunConfig.load(tmp_path / "missing.ini")


def test_config_sync_and_validation():
    cfg = RunConfig.toy(conditioning="nocogan")
    assert cfg.generator.conditioning is False
    assert cfg.generator.disc_latent_dim == cfg.disc_model.latent_dim == 64
    with pytest.raises(ValueError):
        TrainConfig(conditioning="other")
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
