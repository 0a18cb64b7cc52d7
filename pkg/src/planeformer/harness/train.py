"""Training driver: Adam with a step-halving schedule, per-epoch checkpoints, JSONL run log."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..losses import TrainingStepError, scene_targets, total_loss
from ..matching import MatchingError
from ..model import PlaneFormer
from ..scene_synth import load_split
from .checkpoint import save_checkpoint
from .config import TrainConfig

log = logging.getLogger(__name__)


class TrainingAborted(RuntimeError):
    def __init__(self, component, checkpoint, epoch, step):
        super().__init__(f"non-finite loss in '{component}' at epoch {epoch} step {step}; "
                         f"last good checkpoint: {checkpoint}")
        self.component = component
        self.checkpoint = checkpoint


class RunLog:
    """Append-only JSON-lines log of a training run."""

    def __init__(self, path, append=False):
        self.path = Path(path)
        self.records = []
        if append and self.path.exists():
            self.records = read_log(self.path)
        elif self.path.exists():
            self.path.unlink()

    def write(self, record: dict):
        self.records.append(record)
        with open(self.path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def of_type(self, kind):
        return [r for r in self.records if r.get("type") == kind]


def read_log(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


@dataclass
class TrainResult:
    checkpoint: Path
    log_path: Path
    log: RunLog
    model: PlaneFormer


def scene_batch(scenes, idx, cfg: TrainConfig, epoch: int, dtype=torch.float32):
    images = torch.as_tensor(np.stack([scenes[i].image for i in idx]), dtype=dtype).permute(0, 3, 1, 2).contiguous()
    lines = [torch.as_tensor(scenes[i].line_array(), dtype=dtype) for i in idx] if cfg.use_lines else None
    targets = [scene_targets(scenes[i], cfg.num_queries, cfg.plane_point_cap,
                             seed=cfg.seed * 1_000_003 + int(i) * 1009 + epoch, dtype=dtype) for i in idx]
    return images, lines, targets


def resume_key(cfg: TrainConfig) -> str:
    """Fingerprint that ignores ``epochs`` so a finished run can be extended."""
    return cfg.replace(epochs=1).fingerprint()


def set_deterministic(seed: int):
    torch.manual_seed(seed)
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True)


def train(cfg: TrainConfig, data_root, out_dir, split: str = "train", scenes=None, resume: bool = False,
          max_steps_per_epoch: int | None = None) -> TrainResult:
    """Train from scratch (or resume) and checkpoint after every epoch.

    ``scenes`` may be passed directly instead of loading ``<data_root>/<split>``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    set_deterministic(cfg.seed)
    if scenes is None:
        scenes = load_split(data_root, split, cfg.num_queries)
    if not scenes:
        raise ValueError("training set is empty")
    too_many = max(s.num_planes for s in scenes)
    if too_many > cfg.num_queries:
        raise ValueError(f"a scene has {too_many} planes but num_queries={cfg.num_queries}")

    model = PlaneFormer(cfg.model_config())
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    loss_cfg = cfg.loss_config()
    ckpt_path = out / "checkpoint.npz"
    state_path = out / "train_state.pt"
    start_epoch = 1
    runlog = RunLog(out / "log.jsonl", append=resume)
    if resume and state_path.exists():
        state = torch.load(state_path, weights_only=False)
        if state["fingerprint"] != resume_key(cfg):
            raise ValueError("resume state was produced by a different config")
        model.load_state_dict(state["model"])
        opt.load_state_dict(state["optim"])
        torch.set_rng_state(state["torch_rng"])
        start_epoch = state["epoch"] + 1
    else:
        runlog.write({"type": "config", "fingerprint": cfg.fingerprint(),
                      "model_fingerprint": cfg.model_config().fingerprint(), "config": cfg.to_dict(),
                      "num_scenes": len(scenes)})

    t0 = time.time()
    step = 0
    for epoch in range(start_epoch, cfg.epochs + 1):
        lr = cfg.lr_at(epoch)
        for group in opt.param_groups:
            group["lr"] = lr
        model.train()
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(scenes))
        batches = [order[i:i + cfg.batch_size] for i in range(0, len(order), cfg.batch_size)]
        if max_steps_per_epoch is not None:
            batches = batches[:max_steps_per_epoch]
        sums = {}
        for bi, idx in enumerate(batches):
            images, lines, targets = scene_batch(scenes, idx, cfg, epoch)
            output = model(images, lines, with_aux=cfg.aux_weight > 0)
            try:
                bd = total_loss(output, targets, loss_cfg)
            except (TrainingStepError, MatchingError) as exc:
                # non-finite predictions break the matching cost before any loss term is formed
                component = getattr(exc, "component", "matching_cost")
                runlog.write({"type": "abort", "epoch": epoch, "step": step, "component": component})
                raise TrainingAborted(component, ckpt_path if ckpt_path.exists() else None, epoch, step) from exc
            opt.zero_grad(set_to_none=True)
            bd.total.backward()
            if cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            rec = bd.as_dict()
            for k, v in rec.items():
                sums[k] = sums.get(k, 0.0) + v
            runlog.write({"type": "step", "epoch": epoch, "step": step, "batch": bi, "lr": lr, **rec})
            step += 1
        means = {k: v / max(len(batches), 1) for k, v in sums.items()}
        runlog.write({"type": "epoch", "epoch": epoch, "lr": lr, "wall": time.time() - t0, **means})
        log.info("epoch %d lr %.3g total %.4f (%.0fs)", epoch, lr, means.get("total", float("nan")), time.time() - t0)
        save_checkpoint(model, cfg, ckpt_path, {"epoch": epoch})
        torch.save({"model": model.state_dict(), "optim": opt.state_dict(), "epoch": epoch,
                    "torch_rng": torch.get_rng_state(), "fingerprint": resume_key(cfg)}, state_path)
    model.eval()
    return TrainResult(ckpt_path, runlog.path, runlog, model)
