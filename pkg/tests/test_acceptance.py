"""End-to-end acceptance checks, one test per criterion, each printing a PASS/FAIL line.

The learning check trains two desk-scale models. Their data and checkpoints are cached under
``PLANEFORMER_ACCEPTANCE_DIR`` (default ``<repo>/.acceptance_cache``) keyed by the config
fingerprint and a generator hash, so a rerun only evaluates. ``PLANEFORMER_RETRAIN=1`` forces
fresh training.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest
import torch
from conftest import acceptance_line, tiny_config, two_plane_scene
from oracles import brute_force_assignment, directional_check, pair_counting_scores, perfect_output, rel_err

from planeformer.geometry import backproject_map, fit_plane
from planeformer.harness import TrainConfig, evaluate_checkpoint, read_checkpoint, train
from planeformer.losses import COMPONENTS, LossConfig, scene_targets, total_loss
from planeformer.matching import solve_matching
from planeformer.metrics import plane_pixel_recall, seg_scores
from planeformer.model import PlaneFormer
from planeformer.scene_synth import (
    DatasetManifest,
    SceneConfig,
    generate_scene,
    load_split,
    read_manifest,
    scene_seed,
    write_dataset,
)
from planeformer.segmentation import ground_truth_result, segment

CACHE = Path(os.environ.get("PLANEFORMER_ACCEPTANCE_DIR", Path(__file__).resolve().parents[1] / ".acceptance_cache"))
RETRAIN = os.environ.get("PLANEFORMER_RETRAIN") == "1"
LEARN_SIZE = (256, 192)
TRAIN_SEED, TEST_SEED = 7, 8


def test_criterion_1_matching_oracle():
    rng = np.random.default_rng(2024)
    costs = [rng.uniform(0, 10, (6, 6)) for _ in range(200)]
    t0 = time.perf_counter()
    solved = [solve_matching(c) for c in costs]
    elapsed = time.perf_counter() - t0
    exact = 0
    for c, res in zip(costs, solved):
        got = sum(c[i][res.sigma[i]] for i in range(6))
        exact += got == brute_force_assignment(c)
    ok = exact == 200 and elapsed < 5.0
    acceptance_line(1, "matching oracle", ok, f"{exact}/200 exact, {elapsed:.3f} s")
    assert ok


def test_criterion_2_gradient_suite():
    t0 = time.perf_counter()
    torch.manual_seed(0)
    model = PlaneFormer(tiny_config(d_model=16, num_queries=4)).double()
    scenes = [two_plane_scene(32, 24, seed=0), two_plane_scene(32, 24, seed=1)]
    images = torch.as_tensor(np.stack([s.image for s in scenes]), dtype=torch.float64).permute(0, 3, 1, 2)
    lines = [torch.as_tensor(s.line_array()) for s in scenes]
    targets = [scene_targets(s, 4, point_cap=64) for s in scenes]
    cfg = LossConfig()
    ref = total_loss(model(images, lines), targets, cfg)
    params = [p for p in model.parameters() if p.requires_grad]
    worst = {}
    for comp in (*COMPONENTS, "total"):
        def fn(comp=comp):
            bd = total_loss(model(images, lines), targets, cfg, matches=ref.matches, aux_matches=ref.aux_matches)
            return getattr(bd, comp)

        errs = []
        for seed in range(2):
            a, fd = directional_check(fn, params, h=1e-4, seed=seed)
            errs.append(rel_err(a, fd) if a != 0.0 else float("inf"))
        worst[comp] = max(errs)
    elapsed = time.perf_counter() - t0
    ok = all(e < 1e-3 for e in worst.values()) and elapsed < 120
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    acceptance_line(2, "gradient suite", ok, f"max rel err per component [{detail}], {elapsed:.1f} s")
    assert ok


def test_criterion_3_zero_at_truth():
    cfg = SceneConfig(width=64, height=48, image_noise=0.0)
    scenes = [generate_scene(i, cfg) for i in range(20)]
    worst = {k: 0.0 for k in ("cls", "param", "embed_pull", "embed_push", "depth", "center_inst", "center_pix")}
    for s in scenes:
        bd = total_loss(perfect_output([s], 20), [scene_targets(s, 20)], LossConfig())
        for k in worst:
            worst[k] = max(worst[k], float(getattr(bd, k)))
    ok = all(v < 1e-8 for v in worst.values())
    acceptance_line(3, "zero at truth", ok, "max " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_4_geometry_round_trip():
    cfg = SceneConfig()
    fit_err = depth_err = 0.0
    for i in range(50):
        s = generate_scene(i, cfg)
        pts = backproject_map(s.depth, s.K_cam)
        for k, plane in enumerate(s.planes, start=1):
            n = np.asarray(plane.n)
            fit = np.asarray(fit_plane(pts[s.mask == k]).n)
            fit_err = max(fit_err, np.linalg.norm(fit - n) / np.linalg.norm(n))
        res = ground_truth_result(s)
        depth_err = max(depth_err, float(np.abs(res.assembled_depth - s.depth).max()))
    ok = fit_err < 1e-5 and depth_err < 1e-5
    acceptance_line(4, "geometry round trip", ok, f"max fit rel err {fit_err:.1e}, max depth err {depth_err:.1e} m")
    assert ok


def test_criterion_5_metric_oracles():
    rng = np.random.default_rng(5)
    exact = 0
    for _ in range(100):
        h, w = rng.integers(1, 5, size=2)
        gt = rng.integers(0, rng.integers(1, 5), (h, w))
        pred = rng.integers(0, rng.integers(1, 5), (h, w))
        got = seg_scores(pred, gt)
        vi, ri, sc = pair_counting_scores(pred, gt)
        exact += abs(got.VI - vi) < 1e-12 and got.RI == ri and abs(got.SC - sc) < 1e-12
    m = rng.integers(0, 4, (4, 4))
    ident = seg_scores(m, m)
    identical = (ident.VI, ident.RI, ident.SC) == (0.0, 1.0, 1.0)
    flips = 0
    scenes = [generate_scene(i, SceneConfig(width=96, height=72)) for i in range(5)]
    for s in scenes:
        res = ground_truth_result(s)
        res.assembled_depth = res.assembled_depth.copy()
        res.assembled_depth[s.mask == 1] += 0.2
        below, above = plane_pixel_recall(res, s, (0.2 - 1e-9, 0.2 + 1e-9)).plane_recall
        M = s.num_planes
        flips += below == (M - 1) / M and above == 1.0
    ok = exact == 100 and identical and flips == len(scenes)
    acceptance_line(5, "metric oracles", ok,
                    f"{exact}/100 masks match the pair-counting oracle, identical masks {identical}, "
                    f"recall flips at 0.2 m in {flips}/{len(scenes)} scenes")
    assert ok


def test_criterion_6_structural_invariants():
    torch.manual_seed(0)
    model = PlaneFormer(TrainConfig().model_config()).double().eval()
    s = generate_scene(2, SceneConfig(width=128, height=96))
    img = torch.as_tensor(s.image[None], dtype=torch.float64).permute(0, 3, 1, 2)
    lines = torch.as_tensor(s.line_array())
    perm = torch.randperm(len(lines))
    with torch.no_grad():
        a = model(img, [lines], with_attention=True)
        b = model(img, [lines[perm]])
        empty = model(img, [lines[:0]])
        ctx_only = model(img, None)
    perm_diff = float((a.instances.tokens - b.instances.tokens).abs().max())
    empty_equal = torch.equal(empty.instances.tokens, ctx_only.instances.tokens)
    rows = [a.attention["context"].flatten(2).sum(-1), a.attention["line"].sum(-1)]
    for layer in (*a.attention["context_layers"], *a.attention["line_layers"]):
        rows.append(layer.sum(-1))
    row_err = max(float((r - 1).abs().max()) for r in rows)
    K = a.instances.logits.shape[1]
    # an untrained classifier scores every slot alike; shift the plane logits so slots straddle 0.5
    logits = a.instances.logits[0].clone()
    logits[:, 1] += torch.linspace(-4, 4, K, dtype=logits.dtype) - (logits[:, 1] - logits[:, 0]).mean()
    prob = logits.softmax(-1)[:, 1].numpy()
    res = segment(prob, a.instances.params[0].numpy(), a.instances.embeds[0].numpy(),
                  a.pixels.embed_map[0].permute(1, 2, 0).numpy(), a.pixels.depth_map[0].numpy(), s.K_cam)
    kept_ok = [k.slot for k in res.kept] == [int(i) for i in np.flatnonzero(prob > 0.5)]
    ok = perm_diff < 1e-5 and empty_equal and row_err <= 1e-6 and K == 20 and kept_ok
    acceptance_line(6, "structural invariants", ok,
                    f"line permutation diff {perm_diff:.1e}, empty lines == context only {empty_equal}, "
                    f"attention row err {row_err:.1e}, slots {K}, keep rule {kept_ok} "
                    f"({len(res.kept)} of {K} kept)")
    assert ok


# desk-scale learning check


def _dataset():
    root = CACHE / "data256"
    W, H = LEARN_SIZE
    specs = {"train": (500, TRAIN_SEED), "test": (50, TEST_SEED)}
    probe = generate_scene(scene_seed(TEST_SEED, 0), SceneConfig(width=W, height=H))
    try:
        man = read_manifest(root)["splits"]
        fresh = all(man[k]["count"] == n and man[k]["seed"] == seed and (man[k]["width"], man[k]["height"]) == (W, H)
                    for k, (n, seed) in specs.items())
        fresh = fresh and np.array_equal(load_split(root, "test")[0].image, probe.image)
    except (OSError, KeyError, IndexError, ValueError):
        fresh = False
    if not fresh:
        for split, (n, seed) in specs.items():
            write_dataset(DatasetManifest(str(root), split, n, width=W, height=H, seed=seed))
    return root


def _trained(cfg, name, data):
    out = CACHE / name
    ckpt = out / "checkpoint.npz"
    if not RETRAIN and ckpt.exists():
        stored, _, extra = read_checkpoint(ckpt)
        if stored.fingerprint() == cfg.fingerprint() and extra.get("epoch") == cfg.epochs:
            return ckpt
    resume = not RETRAIN and (out / "train_state.pt").exists()
    try:
        return train(cfg, data, out, resume=resume).checkpoint
    except ValueError:
        return train(cfg, data, out).checkpoint


@pytest.fixture(scope="module")
def learned():
    data = _dataset()
    base = TrainConfig(epochs=60)
    ckpt_lines = _trained(base, "run256_lines", data)
    ckpt_plain = _trained(base.replace(use_lines=False), "run256_nolines", data)
    test = load_split(data, "test")
    return {
        "lines": evaluate_checkpoint(ckpt_lines, scenes=test),
        "plain": evaluate_checkpoint(ckpt_plain, scenes=test),
    }


@pytest.mark.slow
def test_criterion_7_desk_scale_learning(learned):
    lines, plain = learned["lines"], learned["plain"]
    recall = lines.recall_at(0.6)
    ri = lines.seg["RI"]
    wins = [lines.seg["VI"] < plain.seg["VI"], lines.seg["RI"] > plain.seg["RI"], lines.seg["SC"] > plain.seg["SC"]]
    ok = recall >= 0.70 and ri >= 0.85 and sum(wins) >= 2
    acceptance_line(
        7, "desk-scale learning", ok,
        f"recall@0.60 {recall:.3f} (>= 0.70), RI {ri:.3f} (>= 0.85), with lines VI/RI/SC "
        f"{lines.seg['VI']:.3f}/{lines.seg['RI']:.3f}/{lines.seg['SC']:.3f} vs no lines "
        f"{plain.seg['VI']:.3f}/{plain.seg['RI']:.3f}/{plain.seg['SC']:.3f} ({sum(wins)}/3 better)")
    assert ok


def test_criterion_8_schedule_conformance(tmp_path):
    scenes = [generate_scene(i, SceneConfig(width=64, height=48)) for i in range(2)]
    cfg = TrainConfig(d_model=16, num_queries=10, heads=2, enc_layers=1, dec_layers=1, ffn_dim=16,
                      backbone_channels=(4, 4, 8, 8), pixel_width=4, batch_size=2, epochs=60)
    res = train(cfg, None, tmp_path, scenes=scenes)
    lr = {r["epoch"]: r["lr"] for r in res.log.of_type("epoch")}
    steps = {r["epoch"]: r["lr"] for r in res.log.of_type("step")}
    want = {16: 5e-5, 31: 2.5e-5, 46: 1.25e-5}
    ok = all(lr[e] == v and steps[e] == v for e, v in want.items()) and lr[15] == 1e-4
    acceptance_line(8, "schedule conformance", ok, ", ".join(f"epoch {e} lr {lr[e]:g}" for e in want))
    assert ok
