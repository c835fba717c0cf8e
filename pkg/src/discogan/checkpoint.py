"""Versioned checkpoint container shared by every trained network."""

from __future__ import annotations

import hashlib
import io
from pathlib import Path

import torch

FORMAT = "discogan-checkpoint"
VERSION = 1


def fingerprint(state) -> str:
    """Content hash of a module or state dict (names, dtypes, shapes, values)."""
    if isinstance(state, torch.nn.Module):
        state = state.state_dict()
    h = hashlib.sha256()
    for name in sorted(state):
        t = state[name].detach().cpu().contiguous()
        h.update(name.encode())
        h.update(str(t.dtype).encode())
        h.update(str(tuple(t.shape)).encode())
        h.update(t.numpy().tobytes())
    return h.hexdigest()


def save(path, kind: str, payload: dict) -> None:
    blob = {"format": FORMAT, "version": VERSION, "kind": kind, **payload}
    buf = io.BytesIO()
    torch.save(blob, buf)
    Path(path).write_bytes(buf.getvalue())


def load(path, kind: str | None = None) -> dict:
    blob = torch.load(Path(path), map_location="cpu", weights_only=False)
    if not isinstance(blob, dict) or blob.get("format") != FORMAT:
        raise ValueError(f"{path} is not a {FORMAT} file")
    if blob.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {blob.get('version')}")
    if kind is not None and blob["kind"] != kind:
        raise ValueError(f"{path} holds a {blob['kind']!r} checkpoint, expected {kind!r}")
    return blob
