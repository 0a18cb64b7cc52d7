"""2D sine/cosine positional encodings and bilinear feature sampling."""

import math

import torch


def sine_encoding(xy: torch.Tensor, dim: int, temperature: float = 10000.0) -> torch.Tensor:
    """Encode normalized coordinates ``xy`` (..., 2) in [0, 1] into ``dim`` channels.

    Half the channels encode y and half encode x, each as interleaved sin/cos
    pairs (the DETR layout), so the map can be evaluated at any sub-pixel point.
    """
    if dim % 4:
        raise ValueError(f"positional encoding width must be divisible by 4, got {dim}")
    npf = dim // 2
    k = torch.arange(npf, dtype=xy.dtype, device=xy.device)
    dim_t = temperature ** (2 * torch.div(k, 2, rounding_mode="floor") / npf)
    scaled = xy * (2 * math.pi)
    pos_x = scaled[..., 0:1] / dim_t
    pos_y = scaled[..., 1:2] / dim_t
    pos_x = torch.stack((pos_x[..., 0::2].sin(), pos_x[..., 1::2].cos()), dim=-1).flatten(-2)
    pos_y = torch.stack((pos_y[..., 0::2].sin(), pos_y[..., 1::2].cos()), dim=-1).flatten(-2)
    return torch.cat((pos_y, pos_x), dim=-1)


def grid_encoding(h: int, w: int, stride: int, image_hw, dim: int, dtype=torch.float32, device=None) -> torch.Tensor:
    """Positional map (h, w, dim) for a feature grid whose cell (i, j) sits at
    pixel (j * stride, i * stride) of an image of size ``image_hw``."""
    H, W = image_hw
    ys = torch.arange(h, dtype=dtype, device=device) * stride / H
    xs = torch.arange(w, dtype=dtype, device=device) * stride / W
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    return sine_encoding(torch.stack((gx, gy), dim=-1), dim)


def bilinear_sample(fmap: torch.Tensor, pts: torch.Tensor) -> torch.Tensor:
    """Sample ``fmap`` (B, C, h, w) at grid coordinates ``pts`` (B, N, 2) given as (x, y).

    Coordinates are clamped to the valid window; a point on a grid node returns
    that node exactly.
    """
    B, C, h, w = fmap.shape
    x = pts[..., 0].clamp(0, w - 1)
    y = pts[..., 1].clamp(0, h - 1)
    x0 = x.detach().floor().clamp(max=max(w - 2, 0))
    y0 = y.detach().floor().clamp(max=max(h - 2, 0))
    wx = x - x0
    wy = y - y0
    x0 = x0.long()
    y0 = y0.long()
    x1 = (x0 + 1).clamp(max=w - 1)
    y1 = (y0 + 1).clamp(max=h - 1)
    flat = fmap.flatten(2)  # B, C, h*w

    def gather(yy, xx):
        idx = (yy * w + xx).unsqueeze(1).expand(-1, C, -1)
        return flat.gather(2, idx)  # B, C, N

    wx = wx.unsqueeze(1)
    wy = wy.unsqueeze(1)
    out = (gather(y0, x0) * (1 - wx) * (1 - wy) + gather(y0, x1) * wx * (1 - wy)
           + gather(y1, x0) * (1 - wx) * wy + gather(y1, x1) * wx * wy)
    return out.transpose(1, 2)  # B, N, C
