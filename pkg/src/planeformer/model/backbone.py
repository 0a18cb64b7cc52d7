"""Small strided conv backbone and the top-down pixel decoders."""

import torch
from torch import nn
from torch.nn import functional as F


class ConfigError(ValueError):
    pass


def _norm(c):
    return nn.GroupNorm(min(8, c), c)


class PyramidBackbone(nn.Module):
    """Four stride-2 stages producing F1..F4 at 1/2 .. 1/16 resolution.

    Inputs must be divisible by 8; the last stage rounds odd sizes up.
    """

    def __init__(self, channels=(32, 64, 128, 256), in_channels=3):
        super().__init__()
        if len(channels) != 4:
            raise ConfigError("backbone needs exactly four stage widths")
        self.channels = tuple(channels)
        stages = []
        prev = in_channels
        for c in channels:
            stages.append(nn.Sequential(
                nn.Conv2d(prev, c, 3, stride=2, padding=1, bias=False), _norm(c), nn.ReLU(inplace=True),
                nn.Conv2d(c, c, 3, padding=1, bias=False), _norm(c), nn.ReLU(inplace=True),
            ))
            prev = c
        self.stages = nn.ModuleList(stages)

    def forward(self, image):
        H, W = image.shape[-2:]
        if H % 8 or W % 8:
            raise ConfigError(f"image size {W}x{H} must be divisible by 8")
        feats = []
        x = image
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


class TopDownDecoder(nn.Module):
    """Lateral 1x1 projections merged coarse-to-fine, upsampled to full resolution."""

    def __init__(self, in_channels, width, out_channels):
        super().__init__()
        self.lateral = nn.ModuleList(nn.Conv2d(c, width, 1) for c in in_channels)
        self.smooth = nn.ModuleList(
            nn.Sequential(nn.Conv2d(width, width, 3, padding=1, bias=False), _norm(width), nn.ReLU(inplace=True))
            for _ in in_channels[:-1]
        )
        self.head = nn.Sequential(
            nn.Conv2d(width, width, 3, padding=1), nn.ReLU(inplace=True), nn.Conv2d(width, out_channels, 1)
        )

    def forward(self, feats, out_hw):
        x = self.lateral[-1](feats[-1])
        for i in range(len(feats) - 2, -1, -1):
            up = F.interpolate(x, size=feats[i].shape[-2:], mode="bilinear", align_corners=False)
            x = self.smooth[i](self.lateral[i](feats[i]) + up)
        x = self.head(x)
        return F.interpolate(x, size=tuple(out_hw), mode="bilinear", align_corners=False)


def positive_depth(raw: torch.Tensor) -> torch.Tensor:
    return F.softplus(raw) + 1e-3
