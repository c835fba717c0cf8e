"""Two-stage training: discriminative pre-training, then gated adversarial training."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from . import checkpoint
from .adversary import MsStftDiscriminator, disc_train_loss, feat_match_loss, gen_adv_loss
from .config import RunConfig
from .disc_model import DiscModel, FrozenDiscModel, disc_from_payload, disc_payload, freeze, train_disc_step
from .generator import Generator, generator_forward
from .losses import LossBreakdown, freq_loss, time_loss, total_gen_loss, weighted_total

log = logging.getLogger(__name__)

Pairs = Sequence[tuple[np.ndarray, np.ndarray]]

DTYPES = {"float32": torch.float32, "float64": torch.float64}


class BatchSampler:
    """Seeded per-epoch shuffling; the full state round-trips through checkpoints."""

    def __init__(self, size: int, batch_size: int, seed: int):
        if size < 1:
            raise ValueError("training set is empty")
        self.size = size
        self.batch_size = min(batch_size, size)
        self.rng = np.random.default_rng(seed)
        self.order = self.rng.permutation(size)
        self.pos = 0

    def next(self) -> np.ndarray:
        if self.pos + self.batch_size > self.size:
            self.order = self.rng.permutation(self.size)
            self.pos = 0
        idx = self.order[self.pos : self.pos + self.batch_size]
        self.pos += self.batch_size
        return idx

    def state(self) -> dict:
        return {"rng": self.rng.bit_generator.state, "order": self.order.tolist(), "pos": self.pos}

    def restore(self, state: dict) -> None:
        self.rng.bit_generator.state = state["rng"]
        self.order = np.asarray(state["order"])
        self.pos = state["pos"]


def make_batch(pairs: Pairs, idx, dtype=torch.float32) -> tuple[torch.Tensor, torch.Tensor]:
    n = min(len(pairs[i][0]) for i in idx)
    x = torch.from_numpy(np.stack([pairs[i][0][:n] for i in idx])).to(dtype)
    s = torch.from_numpy(np.stack([pairs[i][1][:n] for i in idx])).to(dtype)
    return x, s


class JsonlLog:
    def __init__(self, path, truncate_after: int | None = None):
        self.path = Path(path)
        if truncate_after is None:
            self.path.write_text("", encoding="utf-8")
        else:
            kept = [r for r in read_log(self.path) if r["step"] <= truncate_after] if self.path.exists() else []
            self.path.write_text("".join(json.dumps(r) + "\n" for r in kept), encoding="utf-8")

    def write(self, record: dict) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")


def read_log(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def _adam(params, lr, betas):
    return torch.optim.Adam(params, lr=lr, betas=tuple(betas))


# stage 1


def train_stage1(pairs: Pairs, cfg: RunConfig, out_dir, resume=None) -> Path:
    """Pre-train the discriminative model on negative SI-SDR.

    Writes ``disc.ckpt`` (plus ``disc_step<k>.ckpt`` snapshots) and
    ``stage1_log.jsonl`` under ``out_dir``.
    """
    tc = cfg.train
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dtype = DTYPES[tc.dtype]
    torch.manual_seed(tc.seed)
    model = DiscModel(cfg.disc_model).to(dtype)
    opt = _adam(model.parameters(), tc.stage1_lr, tc.stage1_betas)
    sampler = BatchSampler(len(pairs), tc.batch_size, tc.seed)
    step = 0
    if resume is not None:
        blob = checkpoint.load(resume, "disc")
        model.load_state_dict(blob["params"])
        opt.load_state_dict(blob["train_state"]["optimizer"])
        sampler.restore(blob["train_state"]["sampler"])
        torch.set_rng_state(blob["train_state"]["torch_rng"])
        step = blob["train_state"]["step"]
    log_file = JsonlLog(out / "stage1_log.jsonl", truncate_after=step if resume is not None else None)

    def snapshot(path):
        state = {
            "step": step,
            "optimizer": opt.state_dict(),
            "sampler": sampler.state(),
            "torch_rng": torch.get_rng_state(),
        }
        checkpoint.save(path, "disc", {**disc_payload(model), "train_config": cfg.to_dict(), "train_state": state})

    while step < tc.stage1_iterations:
        x, s = make_batch(pairs, sampler.next(), dtype)
        loss = train_disc_step(model, opt, x, s)
        step += 1
        log_file.write({"step": step, "loss": loss})
        if tc.checkpoint_every and step % tc.checkpoint_every == 0:
            snapshot(out / f"disc_step{step}.ckpt")
    final = out / "disc.ckpt"
    snapshot(final)
    return final


# stage 2


def should_update_disc(l_disc_train: float, l_adv_gen: float) -> bool:
    """Update the discriminator only while its loss exceeds the generator's."""
    return l_disc_train > l_adv_gen


@dataclass
class Stage2State:
    step: int
    gen: Generator
    msd: MsStftDiscriminator
    frozen: FrozenDiscModel
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    disc_updated: bool = False
    last_checkpoint: Path | None = None


def init_stage2(cfg: RunConfig, frozen: FrozenDiscModel) -> Stage2State:
    tc = cfg.train
    cfg.sync()
    dtype = DTYPES[tc.dtype]
    torch.manual_seed(tc.seed)
    gen = Generator(cfg.generator).to(dtype)
    msd = MsStftDiscriminator(cfg.adversary).to(dtype)
    frozen.to(dtype)
    return Stage2State(
        step=0,
        gen=gen,
        msd=msd,
        frozen=frozen,
        opt_g=_adam(gen.parameters(), tc.lr, tc.betas),
        opt_d=_adam(msd.parameters(), tc.lr, tc.betas),
    )


def train_stage2_step(
    batch: tuple[torch.Tensor, torch.Tensor],
    state: Stage2State,
    cfg: RunConfig,
    gate: Callable[[float, float], bool] = should_update_disc,
) -> tuple[Stage2State, LossBreakdown]:
    """One generator update, then a gated discriminator update.

    The returned breakdown holds the losses measured before either update.
    """
    x, s = batch
    gen, msd = state.gen, state.msd
    gen.train()
    msd.train()
    s_hat = generator_forward(x, state.frozen, gen)
    out_real = msd(s)
    out_fake = msd(s_hat)
    real_targets = [type(o)(o.logits.detach(), [f.detach() for f in o.features]) for o in out_real]
    l_t = time_loss(s, s_hat)
    l_f = freq_loss(s, s_hat, cfg.spectral_loss)
    l_adv = gen_adv_loss(out_fake)
    l_feat = feat_match_loss(real_targets, out_fake)
    parts = {"l_t": l_t.item(), "l_f": l_f.item(), "l_adv": l_adv.item(), "l_feat": l_feat.item()}
    try:
        breakdown = total_gen_loss(parts, cfg.loss_weights)
    except FloatingPointError as exc:
        raise FloatingPointError(f"{exc}; last good checkpoint: {state.last_checkpoint}") from exc

    state.opt_g.zero_grad(set_to_none=True)
    weighted_total(l_t, l_f, l_adv, l_feat, cfg.loss_weights).backward()
    state.opt_g.step()

    fake_d = msd(s_hat.detach())
    l_disc = disc_train_loss(out_real, fake_d)
    state.disc_updated = gate(l_disc.item(), parts["l_adv"])
    state.opt_d.zero_grad(set_to_none=True)
    if state.disc_updated:
        l_disc.backward()
        state.opt_d.step()
    state.step += 1
    return state, breakdown


def gan_payload(state: Stage2State, cfg: RunConfig, sampler: BatchSampler | None = None) -> dict:
    frozen_payload = disc_payload(state.frozen._model)
    return {
        "config": cfg.to_dict(),
        "stft": {"window_size": cfg.generator.window_size, "hop": cfg.generator.hop},
        "params": state.gen.state_dict(),
        "fingerprint": checkpoint.fingerprint(state.gen),
        "msd_params": state.msd.state_dict(),
        "msd_fingerprint": checkpoint.fingerprint(state.msd),
        "frozen_disc": frozen_payload,
        "train_state": {
            "step": state.step,
            "opt_g": state.opt_g.state_dict(),
            "opt_d": state.opt_d.state_dict(),
            "sampler": sampler.state() if sampler else None,
            "torch_rng": torch.get_rng_state(),
        },
    }


def load_gan(path) -> tuple[Generator, FrozenDiscModel, RunConfig]:
    blob = checkpoint.load(path, "gan")
    cfg = RunConfig.from_dict(blob["config"])
    dtype = DTYPES[cfg.train.dtype]
    gen = Generator(cfg.generator).to(dtype)
    gen.load_state_dict(blob["params"])
    if checkpoint.fingerprint(gen) != blob["fingerprint"]:
        raise ValueError(f"{path}: generator parameters do not match the stored fingerprint")
    frozen = freeze(disc_from_payload(blob["frozen_disc"]).to(dtype))
    return gen.eval(), frozen, cfg


def train_stage2(pairs: Pairs, cfg: RunConfig, disc_ckpt, out_dir, resume=None) -> Path:
    """Adversarial training of the generator against the frozen discriminative model.

    Writes ``gan.ckpt`` (plus periodic snapshots) and ``stage2_log.jsonl``.
    """
    tc = cfg.train
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frozen = freeze(disc_from_payload(checkpoint.load(disc_ckpt, "disc")))
    state = init_stage2(cfg, frozen)
    sampler = BatchSampler(len(pairs), tc.batch_size, tc.seed)
    if resume is not None:
        blob = checkpoint.load(resume, "gan")
        if blob["frozen_disc"]["fingerprint"] != frozen.fingerprint:
            raise ValueError("resume checkpoint was trained against a different discriminative model")
        state.gen.load_state_dict(blob["params"])
        state.msd.load_state_dict(blob["msd_params"])
        ts = blob["train_state"]
        state.opt_g.load_state_dict(ts["opt_g"])
        state.opt_d.load_state_dict(ts["opt_d"])
        sampler.restore(ts["sampler"])
        torch.set_rng_state(ts["torch_rng"])
        state.step = ts["step"]
    log_file = JsonlLog(out / "stage2_log.jsonl", truncate_after=state.step if resume is not None else None)
    dtype = DTYPES[tc.dtype]

    def snapshot(path):
        if frozen.current_fingerprint() != frozen.fingerprint:
            raise RuntimeError("frozen discriminative model was modified during stage 2")
        checkpoint.save(path, "gan", gan_payload(state, cfg, sampler))
        state.last_checkpoint = path

    while state.step < tc.iterations:
        batch = make_batch(pairs, sampler.next(), dtype)
        state, parts = train_stage2_step(batch, state, cfg)
        log_file.write({"step": state.step, **parts.as_dict(), "disc_updated": state.disc_updated})
        if tc.checkpoint_every and state.step % tc.checkpoint_every == 0:
            snapshot(out / f"gan_step{state.step}.ckpt")
    final = out / "gan.ckpt"
    snapshot(final)
    return final
