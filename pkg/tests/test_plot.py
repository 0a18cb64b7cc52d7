import os
from pathlib import Path

import matplotlib.image as mpimg
import numpy as np
import pytest

from planeformer.harness.plot import PlotInputError, plot_attention, plot_losses, plot_mask_overlay, plot_recall

GOLDEN = Path(__file__).parent / "golden"
UPDATE = os.environ.get("PLANEFORMER_UPDATE_GOLDEN") == "1"


def fixed_reports():
    thr = [round(0.05 * i, 2) for i in range(13)]
    a = {"depth_recall": {"thresholds": thr, "plane_recall": [min(1, 1.6 * t) for t in thr],
                          "pixel_recall": [min(1, 1.9 * t) for t in thr]}}
    b = {"depth_recall": {"thresholds": thr, "plane_recall": [min(1, 1.2 * t) for t in thr],
                          "pixel_recall": [min(1, 1.4 * t) for t in thr]}}
    return {"with lines": a, "no lines": b}


def fixed_log():
    keys = ("total", "cls", "param", "embed_pull", "embed_push", "depth")
    return [{"type": "epoch", "epoch": e, **{k: (i + 1) * 2.0 / e for i, k in enumerate(keys)}} for e in range(1, 11)]


def fixed_dump():
    H, W = 48, 64
    v, u = np.mgrid[0:H, 0:W]
    image = np.stack([u / W, v / H, 0.5 * np.ones((H, W))], -1)
    mask = (u >= W // 2).astype(int) + 1
    mask[: H // 4] = 0
    ctx = np.stack([np.exp(-((u[::4, ::4] - c) ** 2) / 60.0) for c in (10, 50)])
    ctx = ctx / ctx.sum((1, 2), keepdims=True)
    lines = np.array([[32.0, 0, 32, 47], [0, 12, 63, 12]])
    return image, mask, {"context_attention": ctx, "line_attention": np.array([[0.8, 0.2], [0.3, 0.7]]),
                         "lines": lines}


def render(name, tmp_path):
    path = tmp_path / f"{name}.png"
    if name == "recall":
        plot_recall(fixed_reports(), path)
    elif name == "losses":
        plot_losses(fixed_log(), path)
    else:
        image, mask, dump = fixed_dump()
        plot_mask_overlay(image, mask, path, dump["lines"])
    return path


@pytest.mark.parametrize("name", ["recall", "losses", "mask"])
def test_golden_render(name, tmp_path):
    got = mpimg.imread(render(name, tmp_path))
    golden = GOLDEN / f"{name}.png"
    if UPDATE:
        GOLDEN.mkdir(exist_ok=True)
        golden.write_bytes((tmp_path / f"{name}.png").read_bytes())
    want = mpimg.imread(golden)
    assert got.shape == want.shape
    # small tolerance for font rasterization differences between matplotlib builds
    assert np.abs(got - want).mean() < 0.01


def test_attention_render(tmp_path):
    image, _, dump = fixed_dump()
    img = mpimg.imread(plot_attention(image, dump, tmp_path / "att.png"))
    assert img.ndim == 3 and img.shape[1] > img.shape[0]
    empty = {**dump, "context_attention": np.zeros((0, 12, 16)), "line_attention": np.zeros((0, 2))}
    assert mpimg.imread(plot_attention(image, empty, tmp_path / "none.png")).ndim == 3


def test_missing_fields_are_named(tmp_path):
    reports = fixed_reports()
    del reports["no lines"]["depth_recall"]["pixel_recall"]
    with pytest.raises(PlotInputError, match="pixel_recall"):
        plot_recall(reports, tmp_path / "r.png")
    with pytest.raises(PlotInputError, match="depth_recall"):
        plot_recall({"x": {}}, tmp_path / "r.png")
    log = fixed_log()
    del log[3]["param"]
    with pytest.raises(PlotInputError, match="param"):
        plot_losses(log, tmp_path / "l.png")
    with pytest.raises(PlotInputError, match="epoch"):
        plot_losses([{"type": "step"}], tmp_path / "l.png")
    image, _, dump = fixed_dump()
    with pytest.raises(PlotInputError, match="context_attention"):
        plot_attention(image, {"lines": dump["lines"]}, tmp_path / "a.png")
    with pytest.raises(ValueError):
        plot_mask_overlay(image, np.zeros((3, 3), int), tmp_path / "m.png")
