import numpy as np
import pytest
import torch

from planeformer.geometry import CameraIntrinsics, LineSegment, PlaneParam, plane_center, plane_depth_map
from planeformer.model import ModelConfig
from planeformer.scene_synth import PlanarScene, SceneConfig, generate_scene

TINY = dict(d_model=16, num_queries=4, embed_dim=8, heads=2, enc_layers=2, dec_layers=2, ffn_dim=32,
            backbone_channels=(4, 8, 8, 16), pixel_width=8)


def tiny_config(**kw) -> ModelConfig:
    return ModelConfig(**{**TINY, **kw})


def two_plane_scene(width=32, height=24, seed=0) -> PlanarScene:
    """Hand-built scene: two tilted planes split left/right, plus a small non-plane patch."""
    K = CameraIntrinsics.default(width, height)
    planes = [PlaneParam((0.1, 0.0, 0.5)), PlaneParam((0.0, 0.3, 0.4))]
    mask = np.ones((height, width), dtype=np.int32)
    mask[:, width // 2:] = 2
    mask[: height // 4, : width // 4] = 0
    depth = np.where(mask == 2, plane_depth_map(planes[1], K), plane_depth_map(planes[0], K))
    depth[mask == 0] = 2.5
    centers = [plane_center(mask == i, width, height) for i in (1, 2)]
    rng = np.random.default_rng(seed)
    image = rng.uniform(0, 1, (height, width, 3)).astype(np.float32)
    segs = [LineSegment((width / 2, 0.0), (width / 2, height - 1.0)),
            LineSegment((0.0, height / 4), (width / 4, height / 4)),
            LineSegment((3.3, 20.2), (27.9, 5.1))]
    return PlanarScene(image, depth, mask, planes, centers, segs, K, "two-plane")


@pytest.fixture
def small_scene():
    return generate_scene(3, SceneConfig(width=64, height=48))


@pytest.fixture(scope="session")
def room_scenes():
    cfg = SceneConfig(width=96, height=72)
    return [generate_scene(i, cfg) for i in range(6)]


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)
    np.random.seed(0)


ACCEPTANCE_LINES = []


def acceptance_line(number, name, ok, detail=""):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

