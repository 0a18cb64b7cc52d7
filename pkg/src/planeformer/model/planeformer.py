"""The structure-guided plane transformer.

Data flow: image -> pyramid F1..F4; F4 -> context tokens S_c (encoder);
F2 + line endpoints -> line tokens S_l; shared plane queries cross-attend to
S_c and S_l in two parallel decoders whose outputs are summed into S_p; linear
heads turn S_p into K plane instances. Three top-down decoders produce the
per-pixel embedding, depth and center maps.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import torch
from torch import nn

from .backbone import ConfigError, PyramidBackbone, TopDownDecoder, positive_depth
from .position import bilinear_sample, grid_encoding
from .transformer import Decoder, Encoder

LINE_STRIDE = 4  # F2 resolution
CONTEXT_STRIDE = 16  # F4 resolution


class LineValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 256
    num_queries: int = 20
    embed_dim: int = 8
    heads: int = 8
    enc_layers: int = 6
    dec_layers: int = 6
    ffn_dim: int = 1024
    backbone_channels: tuple = (32, 64, 128, 256)
    pixel_width: int = 64
    dropout: float = 0.0
    use_lines: bool = True
    use_center: bool = True

    def __post_init__(self):
        object.__setattr__(self, "backbone_channels", tuple(int(c) for c in self.backbone_channels))
        if self.num_queries < 1 or self.d_model % 4 or self.embed_dim < 1:
            raise ConfigError(f"invalid model config {self}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["backbone_channels"] = list(self.backbone_channels)
        return d

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class PlaneInstanceSet:
    """K predicted plane instances (batched: leading dim B)."""

    logits: torch.Tensor  # B, K, 2 (index 1 = plane)
    params: torch.Tensor  # B, K, 3
    embeds: torch.Tensor  # B, K, E
    centers: torch.Tensor | None = None  # B, K, 2
    tokens: torch.Tensor | None = None  # S_p, B, K, d

    @property
    def prob(self) -> torch.Tensor:
        """Plane probability per slot."""
        return self.logits.softmax(-1)[..., 1]

    def item(self, b: int) -> "PlaneInstanceSet":
        pick = lambda t: None if t is None else t[b:b + 1]  # noqa: E731
        return PlaneInstanceSet(pick(self.logits), pick(self.params), pick(self.embeds),
                                pick(self.centers), pick(self.tokens))


@dataclass
class PixelOutputs:
    embed_map: torch.Tensor  # B, E, H, W
    depth_map: torch.Tensor  # B, H, W
    center_map: torch.Tensor | None = None  # B, 2, H, W


@dataclass
class AuxPrediction:
    branch: str  # "context" or "context+line"
    layer: int
    instances: PlaneInstanceSet
    valid: torch.Tensor  # B bools; items marked False are left out of the aux loss


@dataclass
class ModelOutput:
    instances: PlaneInstanceSet
    pixels: PixelOutputs
    aux: list = field(default_factory=list)
    attention: dict | None = None


@dataclass
class TokenSequence:
    tokens: torch.Tensor  # B, L, d
    positions: torch.Tensor  # B, L, d
    padding: torch.Tensor | None = None  # B, L bools (True = padded)


@dataclass
class DecodedPlanes:
    S_p: torch.Tensor
    O_c: torch.Tensor
    O_l: torch.Tensor
    context_layers: list
    line_layers: list
    context_attn: list
    line_attn: list
    has_lines: torch.Tensor


class Heads(nn.Module):
    def __init__(self, d, embed_dim, use_center):
        super().__init__()
        self.cls = nn.Linear(d, 2)
        self.param = nn.Linear(d, 3)
        self.embed = nn.Linear(d, embed_dim)
        self.center = nn.Linear(d, 2) if use_center else None

    def forward(self, tokens):
        return PlaneInstanceSet(
            logits=self.cls(tokens),
            params=self.param(tokens),
            embeds=self.embed(tokens),
            centers=self.center(tokens) if self.center is not None else None,
            tokens=tokens,
        )


def _mlp(d_in, d_hidden, d_out):
    return nn.Sequential(nn.Linear(d_in, d_hidden), nn.ReLU(inplace=True), nn.Linear(d_hidden, d_out))


class PlaneFormer(nn.Module):
    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        cfg = config or ModelConfig()
        self.config = cfg
        d = cfg.d_model
        ch = cfg.backbone_channels
        self.backbone_net = PyramidBackbone(ch)
        self.context_proj = nn.Conv2d(ch[3], d, 1)
        self.context_encoder = Encoder(d, cfg.heads, cfg.ffn_dim, cfg.enc_layers, cfg.dropout)
        # unit scale so the slots differ clearly next to the positional encodings
        self.plane_queries = nn.Parameter(torch.randn(cfg.num_queries, d))
        self.context_decoder = Decoder(d, cfg.heads, cfg.ffn_dim, cfg.dec_layers, cfg.dropout)
        if cfg.use_lines:
            self.line_proj = nn.Conv2d(ch[1], d, 1)
            self.line_mlp = _mlp(2 * d, d, d)
            self.line_out_mlp = _mlp(d, d, d)
            self.line_decoder = Decoder(d, cfg.heads, cfg.ffn_dim, cfg.dec_layers, cfg.dropout)
        self.heads = Heads(d, cfg.embed_dim, cfg.use_center)
        self.embed_decoder = TopDownDecoder(ch, cfg.pixel_width, cfg.embed_dim)
        self.depth_decoder = TopDownDecoder(ch, cfg.pixel_width, 1)
        self.center_decoder = TopDownDecoder(ch, cfg.pixel_width, 2) if cfg.use_center else None

    # -- stages -----------------------------------------------------------

    def backbone(self, image):
        return self.backbone_net(image)

    def encode_context(self, F4, image_hw):
        B, _, h, w = F4.shape
        f_c = self.context_proj(F4).flatten(2).transpose(1, 2)
        pos = grid_encoding(h, w, CONTEXT_STRIDE, image_hw, self.config.d_model, f_c.dtype, f_c.device)
        pos = pos.flatten(0, 1).unsqueeze(0).expand(B, -1, -1)
        return TokenSequence(self.context_encoder(f_c, pos), pos)

    def encode_lines(self, lines, F2, image_hw):
        """Tokenize per-image line segments (each an n x 4 tensor of pixel endpoints)."""
        if not self.config.use_lines:
            raise ConfigError("model was built without the line branch")
        H, W = image_hw
        B = F2.shape[0]
        d = self.config.d_model
        counts = [int(len(l)) for l in lines]
        n_max = max(counts) if counts else 0
        dtype, device = F2.dtype, F2.device
        if n_max == 0:
            empty = torch.zeros(B, 0, d, dtype=dtype, device=device)
            return TokenSequence(empty, empty.clone(), torch.zeros(B, 0, dtype=torch.bool, device=device))
        pts = torch.zeros(B, n_max, 4, dtype=dtype, device=device)
        padding = torch.ones(B, n_max, dtype=torch.bool, device=device)
        for b, seg in enumerate(lines):
            seg = torch.as_tensor(seg, dtype=dtype, device=device).reshape(-1, 4)
            if len(seg) == 0:
                continue
            xs, ys = seg[:, 0::2], seg[:, 1::2]
            bad = ~torch.isfinite(seg).all(1) | ((xs < 0) | (xs >= W) | (ys < 0) | (ys >= H)).any(1)
            if bad.any():
                row = int(bad.nonzero()[0])
                raise LineValidationError(f"image {b}: segment {row} {seg[row].tolist()} has an endpoint outside {W}x{H}")
            pts[b, :len(seg)] = seg
            padding[b, :len(seg)] = False
        F_r = self.line_proj(F2)
        h2, w2 = F_r.shape[-2:]
        E_r = grid_encoding(h2, w2, LINE_STRIDE, image_hw, d, dtype, device).permute(2, 0, 1).unsqueeze(0).expand(B, -1, -1, -1)
        grid = pts / LINE_STRIDE
        f1 = bilinear_sample(F_r, grid[..., 0:2])
        f2 = bilinear_sample(F_r, grid[..., 2:4])
        e1 = bilinear_sample(E_r, grid[..., 0:2])
        e2 = bilinear_sample(E_r, grid[..., 2:4])
        f_l = self.line_mlp(torch.cat((f1, f2), dim=-1))
        e_l = (e1 + e2) / 2
        S_l = self.line_out_mlp(f_l)
        keep = (~padding).unsqueeze(-1).to(dtype)
        return TokenSequence(S_l * keep, e_l * keep, padding)

    def decode_planes(self, S_c: TokenSequence, S_l: TokenSequence | None):
        ctx_layers, ctx_attn = self.context_decoder(S_c.tokens, S_c.positions, self.plane_queries, S_c.padding)
        O_c = ctx_layers[-1]
        B = O_c.shape[0]
        if S_l is None or S_l.tokens.shape[1] == 0:
            has_lines = torch.zeros(B, dtype=torch.bool, device=O_c.device)
            return DecodedPlanes(O_c, O_c, torch.zeros_like(O_c), ctx_layers, [], ctx_attn, [], has_lines)
        has_lines = ~S_l.padding.all(dim=1)
        padding = S_l.padding.clone()
        # a fully padded row would softmax over nothing; unmask it and zero its output below
        padding[~has_lines] = False
        line_layers, line_attn = self.line_decoder(S_l.tokens, S_l.positions, self.plane_queries, padding)
        gate = has_lines.to(O_c.dtype).view(B, 1, 1)
        line_layers = [o * gate for o in line_layers]
        O_l = line_layers[-1]
        return DecodedPlanes(O_c + O_l, O_c, O_l, ctx_layers, line_layers, ctx_attn, line_attn, has_lines)

    def predict_instances(self, S_p):
        return self.heads(S_p)

    def decode_pixels(self, pyramid, image_hw):
        return PixelOutputs(
            embed_map=self.embed_decoder(pyramid, image_hw),
            depth_map=positive_depth(self.depth_decoder(pyramid, image_hw)).squeeze(1),
            center_map=self.center_decoder(pyramid, image_hw) if self.center_decoder is not None else None,
        )

    # -- full pass --------------------------------------------------------

    def forward(self, image, lines=None, with_aux=True, with_attention=False):
        """``image``: B x 3 x H x W in [0, 1]; ``lines``: list of B (n_b x 4) pixel-endpoint arrays."""
        image_hw = tuple(image.shape[-2:])
        pyramid = self.backbone(image)
        S_c = self.encode_context(pyramid[3], image_hw)
        S_l = None
        if self.config.use_lines and lines is not None:
            if len(lines) != image.shape[0]:
                raise LineValidationError(f"{len(lines)} line lists for a batch of {image.shape[0]}")
            S_l = self.encode_lines(lines, pyramid[1], image_hw)
        dec = self.decode_planes(S_c, S_l)
        instances = self.predict_instances(dec.S_p)
        aux = []
        if with_aux:
            # per-layer O_c + O_l, so the shared linear heads always see the same kind of input as S_p
            all_valid = torch.ones(image.shape[0], dtype=torch.bool, device=image.device)
            branch = "context+line" if dec.line_layers else "context"
            for i, o in enumerate(dec.context_layers):
                if dec.line_layers:
                    o = o + dec.line_layers[i]
                aux.append(AuxPrediction(branch, i, self.heads(o), all_valid))
        attention = None
        if with_attention:
            hc, wc = pyramid[3].shape[-2:]
            attention = {
                "context": dec.context_attn[-1].mean(1).reshape(image.shape[0], -1, hc, wc),
                "line": dec.line_attn[-1].mean(1) if dec.line_attn else None,
                "line_padding": S_l.padding if S_l is not None else None,
                "context_layers": dec.context_attn,
                "line_layers": dec.line_attn,
            }
        return ModelOutput(instances, self.decode_pixels(pyramid, image_hw), aux, attention)
