"""Enhancement chains: serial application of trained enhancers in the time domain."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .disc_model import load_disc
from .generator import generator_forward
from .trainer import load_gan

STAGES = ("disc", "gan", "gan_nocond", "identity")

# the five configurations compared in the ablation table, in display order
ABLATIONS = {
    "NoCoGAN": ("gan_nocond",),
    "DCCRN + NoCoGAN": ("disc", "gan_nocond"),
    "DisCoGAN": ("gan",),
    "DCCRN + DisCoGAN": ("disc", "gan"),
    "DisCoGAN + DCCRN": ("gan", "disc"),
}

Enhancer = Callable[[np.ndarray], np.ndarray]


def parse_chain(text: str) -> tuple[str, ...]:
    stages = tuple(p.strip() for p in text.replace(",", "+").split("+") if p.strip())
    if not stages:
        raise ValueError("empty enhancement chain")
    for st in stages:
        if st not in STAGES:
            raise ValueError(f"unknown chain stage {st!r}; choose from {', '.join(STAGES)}")
    return stages


def _disc_enhancer(path) -> Enhancer:
    model = load_disc(path).eval()
    dtype = next(model.parameters()).dtype

    def run(x: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            s_hat, _ = model(torch.from_numpy(np.asarray(x)).to(dtype)[None])
        return s_hat[0].double().numpy()

    return run


def _gan_enhancer(path, conditioned: bool) -> Enhancer:
    gen, frozen, cfg = load_gan(path)
    if cfg.generator.conditioning != conditioned:
        want = "discogan" if conditioned else "nocogan"
        raise ValueError(f"{path} was trained with conditioning={cfg.train.conditioning}, stage needs {want}")
    dtype = next(gen.parameters()).dtype

    def run(x: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            s_hat = generator_forward(torch.from_numpy(np.asarray(x)).to(dtype)[None], frozen, gen)
        return s_hat[0].double().numpy()

    return run


def build_enhancer(chain, checkpoints: dict) -> Enhancer:
    """Compose a chain like ``("disc", "gan")`` from ``{stage: checkpoint path}``."""
    chain = parse_chain(chain) if isinstance(chain, str) else tuple(chain)
    steps = []
    for st in chain:
        if st == "identity":
            steps.append(lambda x: np.asarray(x, dtype=np.float64).copy())
            continue
        path = checkpoints.get(st)
        if path is None or not Path(path).exists():
            raise FileNotFoundError(f"chain stage {st!r} needs a checkpoint (got {path})")
        steps.append(_disc_enhancer(path) if st == "disc" else _gan_enhancer(path, st == "gan"))

    def run(x: np.ndarray) -> np.ndarray:
        for step in steps:
            x = step(x)
        return x

    return run
