"""Checkpoint archive: parameter arrays plus the config and its fingerprint."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import torch

from ..model import PlaneFormer
from .config import TrainConfig


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(model: PlaneFormer, cfg: TrainConfig, path, extra: dict | None = None) -> Path:
    path = Path(path)
    arrays = {f"param/{k}": v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    arrays["__config__"] = np.array(json.dumps(cfg.to_dict(), sort_keys=True))
    arrays["__fingerprint__"] = np.array(cfg.model_config().fingerprint())
    arrays["__extra__"] = np.array(json.dumps(extra or {}, sort_keys=True))
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez(tmp, **arrays)
    os.replace(tmp, path)
    return path


def read_checkpoint(path):
    """Returns (TrainConfig, state_dict, extra) after verifying the fingerprint."""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            cfg = TrainConfig.from_dict(json.loads(str(data["__config__"])))
            fingerprint = str(data["__fingerprint__"])
            extra = json.loads(str(data["__extra__"])) if "__extra__" in data else {}
            state = {k[len("param/"):]: torch.from_numpy(np.array(data[k])) for k in data.files if k.startswith("param/")}
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if cfg.model_config().fingerprint() != fingerprint:
        raise CheckpointError(f"checkpoint {path} fingerprint does not match its stored config")
    return cfg, state, extra


def load_model(path, expect: TrainConfig | None = None):
    """Load a checkpoint into a fresh model (eval mode).

    If ``expect`` is given its model fingerprint must match the checkpoint's.
    """
    cfg, state, extra = read_checkpoint(path)
    if expect is not None and expect.model_config().fingerprint() != cfg.model_config().fingerprint():
        raise CheckpointError(
            f"config fingerprint {expect.model_config().fingerprint()} does not match checkpoint "
            f"{cfg.model_config().fingerprint()} ({path}); refusing to run"
        )
    model = PlaneFormer(cfg.model_config())
    model.load_state_dict(state)
    model.eval()
    return model, cfg, extra
