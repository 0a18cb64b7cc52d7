"""Post-norm transformer encoder/decoder layers with positions added to queries and keys."""

from __future__ import annotations

import math

import torch
from torch import nn


class Attention(nn.Module):
    """Multi-head scaled dot-product attention that also returns its weights."""

    def __init__(self, dim, heads):
        super().__init__()
        if dim % heads:
            raise ValueError(f"model width {dim} not divisible by {heads} heads")
        self.heads = heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(self, query, key, value, key_padding_mask=None):
        B, Lq, D = query.shape
        Lk = key.shape[1]
        h = self.heads
        dh = D // h
        q = self.q_proj(query).view(B, Lq, h, dh).transpose(1, 2)
        k = self.k_proj(key).view(B, Lk, h, dh).transpose(1, 2)
        v = self.v_proj(value).view(B, Lk, h, dh).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(dh)
        if key_padding_mask is not None:
            scores = scores.masked_fill(key_padding_mask[:, None, None, :], float("-inf"))
        attn = scores.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(B, Lq, D)
        return self.out_proj(out), attn


class FeedForward(nn.Sequential):
    def __init__(self, dim, hidden, dropout=0.0):
        super().__init__(nn.Linear(dim, hidden), nn.ReLU(inplace=True), nn.Dropout(dropout), nn.Linear(hidden, dim))


class EncoderLayer(nn.Module):
    def __init__(self, dim, heads, ffn_dim, dropout=0.0):
        super().__init__()
        self.self_attn = Attention(dim, heads)
        self.ffn = FeedForward(dim, ffn_dim, dropout)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.drop = nn.Dropout(dropout)

    def forward(self, src, pos, key_padding_mask=None):
        qk = src + pos
        out, _ = self.self_attn(qk, qk, src, key_padding_mask)
        src = self.norm1(src + self.drop(out))
        return self.norm2(src + self.drop(self.ffn(src)))


class DecoderLayer(nn.Module):
    def __init__(self, dim, heads, ffn_dim, dropout=0.0):
        super().__init__()
        self.self_attn = Attention(dim, heads)
        self.cross_attn = Attention(dim, heads)
        self.ffn = FeedForward(dim, ffn_dim, dropout)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.norm3 = nn.LayerNorm(dim)
        self.drop = nn.Dropout(dropout)

    def forward(self, tgt, memory, query_pos, pos, key_padding_mask=None):
        qk = tgt + query_pos
        out, _ = self.self_attn(qk, qk, tgt)
        tgt = self.norm1(tgt + self.drop(out))
        out, attn = self.cross_attn(tgt + query_pos, memory + pos, memory, key_padding_mask)
        tgt = self.norm2(tgt + self.drop(out))
        tgt = self.norm3(tgt + self.drop(self.ffn(tgt)))
        return tgt, attn


class Encoder(nn.Module):
    def __init__(self, dim, heads, ffn_dim, layers, dropout=0.0):
        super().__init__()
        self.layers = nn.ModuleList(EncoderLayer(dim, heads, ffn_dim, dropout) for _ in range(layers))

    def forward(self, src, pos, key_padding_mask=None):
        for layer in self.layers:
            src = layer(src, pos, key_padding_mask)
        return src


class Decoder(nn.Module):
    """Stack of decoder layers; returns every layer's (normed) output and cross-attention."""

    def __init__(self, dim, heads, ffn_dim, layers, dropout=0.0):
        super().__init__()
        self.layers = nn.ModuleList(DecoderLayer(dim, heads, ffn_dim, dropout) for _ in range(layers))
        self.norm = nn.LayerNorm(dim)

    def forward(self, memory, pos, query_pos, key_padding_mask=None):
        B = memory.shape[0]
        tgt = torch.zeros(B, *query_pos.shape, dtype=memory.dtype, device=memory.device)
        qpos = query_pos.unsqueeze(0).expand(B, -1, -1)
        outputs, attns = [], []
        for layer in self.layers:
            tgt, attn = layer(tgt, memory, qpos, pos, key_padding_mask)
            outputs.append(self.norm(tgt))
            attns.append(attn)
        return outputs, attns


__all__ = ["Attention", "Encoder", "Decoder", "EncoderLayer", "DecoderLayer"]
