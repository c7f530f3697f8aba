"""Student backbones: an in-tree ViT with per-block Q/K/V projections.

Real foundation backbones are consumed through the same interface (see
model.build_backbone); the in-tree ViT exists so every training and
acceptance path runs without downloaded weights. Initialization is fully
seeded by the backbone id, so two constructions are bit-identical.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import UnsupportedBackbone


@dataclass(frozen=True)
class ViTSpec:
    depth: int
    dim: int
    heads: int
    patch: int
    mlp_ratio: float = 4.0
    default_input: int = 224


BACKBONE_SPECS: dict[str, ViTSpec] = {
    # shape-faithful ViT-B/14 (random weights; param-count and LoRA wiring)
    "vit-b-14": ViTSpec(depth=12, dim=768, heads=12, patch=14, mlp_ratio=4.0, default_input=434),
    # small CPU-friendly students for mock-mode training
    "toy-vit": ViTSpec(depth=4, dim=64, heads=4, patch=8, mlp_ratio=2.0, default_input=64),
    "toy-vit-large": ViTSpec(depth=6, dim=96, heads=4, patch=8, mlp_ratio=2.0, default_input=128),
}

_TOY_PATTERN = re.compile(r"^toy-vit-d(?P<dim>\d+)-l(?P<depth>\d+)-p(?P<patch>\d+)$")


def resolve_spec(backbone_id: str) -> ViTSpec:
    if backbone_id in BACKBONE_SPECS:
        return BACKBONE_SPECS[backbone_id]
    m = _TOY_PATTERN.match(backbone_id)
    if m:
        dim = int(m.group("dim"))
        heads = max(1, dim // 16)
        while dim % heads:
            heads -= 1
        return ViTSpec(
            depth=int(m.group("depth")), dim=dim, heads=heads,
            patch=int(m.group("patch")), mlp_ratio=2.0,
            default_input=int(m.group("patch")) * 8,
        )
    raise UnsupportedBackbone(f"unknown backbone id {backbone_id!r}")


def _seed_from(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little") % (2**63)


def _sinusoidal_grid_embedding(gh: int, gw: int, dim: int) -> torch.Tensor:
    """Fixed 2D sin/cos position embedding, (gh*gw) x dim."""
    half = dim // 2
    ys, xs = torch.meshgrid(
        torch.arange(gh, dtype=torch.float32),
        torch.arange(gw, dtype=torch.float32),
        indexing="ij",
    )

    def encode(pos: torch.Tensor, d: int) -> torch.Tensor:
        omega = torch.exp(-math.log(10000.0) * torch.arange(d // 2, dtype=torch.float32) / max(d // 2, 1))
        angles = pos.reshape(-1, 1) * omega.reshape(1, -1)
        return torch.cat([torch.sin(angles), torch.cos(angles)], dim=1)

    emb = torch.cat([encode(ys, half), encode(xs, dim - half)], dim=1)
    return emb[:, :dim]


class Attention(nn.Module):
    """Multi-head self-attention with separate q/k/v projections."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        h = self.heads

        def split(t: torch.Tensor) -> torch.Tensor:
            return t.reshape(b, n, h, d // h).transpose(1, 2)

        q, k, v = split(self.q_proj(x)), split(self.k_proj(x)), split(self.v_proj(x))
        attn = torch.softmax(q @ k.transpose(-2, -1) * self.scale, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.out_proj(out)


class Block(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        x = x + self.mlp(self.norm2(x))
        return x


class ViTBackbone(nn.Module):
    """Plain ViT over non-overlapping patches with a class token."""

    def __init__(self, backbone_id: str, spec: ViTSpec | None = None):
        super().__init__()
        self.backbone_id = backbone_id
        self.spec = spec or resolve_spec(backbone_id)
        s = self.spec
        self.patch_embed = nn.Conv2d(3, s.dim, kernel_size=s.patch, stride=s.patch)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, s.dim))
        self.blocks = nn.ModuleList(Block(s.dim, s.heads, s.mlp_ratio) for _ in range(s.depth))
        self._init_weights()

    def _init_weights(self) -> None:
        gen = torch.Generator().manual_seed(_seed_from(self.backbone_id))
        with torch.no_grad():
            for p in self.parameters():
                if p.ndim > 1:
                    p.copy_(torch.randn(p.shape, generator=gen) * 0.02)
                else:
                    p.zero_()
            # keep LayerNorm scales at 1
            for m in self.modules():
                if isinstance(m, nn.LayerNorm):
                    m.weight.fill_(1.0)
            self.cls_token.copy_(torch.randn(self.cls_token.shape, generator=gen) * 0.02)

    @property
    def patch_size(self) -> int:
        return self.spec.patch

    @property
    def depth(self) -> int:
        return self.spec.depth

    @property
    def dim(self) -> int:
        return self.spec.dim

    def tokens(self, images: torch.Tensor) -> tuple[torch.Tensor, tuple[int, int]]:
        """Embed B x 3 x H x W images into B x (1 + gh*gw) x dim tokens."""
        b, _, h, w = images.shape
        if h % self.spec.patch or w % self.spec.patch:
            raise ValueError(f"input {h}x{w} not divisible by patch {self.spec.patch}")
        x = self.patch_embed(images)  # B x dim x gh x gw
        gh, gw = x.shape[2], x.shape[3]
        x = x.flatten(2).transpose(1, 2)
        x = x + _sinusoidal_grid_embedding(gh, gw, self.spec.dim).to(x.dtype)
        cls = self.cls_token.expand(b, -1, -1)
        return torch.cat([cls, x], dim=1), (gh, gw)

    def forward_grid(self, images: torch.Tensor, layer: int) -> torch.Tensor:
        """Patch-token grid after block `layer` (0-based): B x gh x gw x dim."""
        if not (0 <= layer < self.spec.depth):
            raise ValueError(f"layer {layer} outside depth {self.spec.depth}")
        x, (gh, gw) = self.tokens(images)
        for i, block in enumerate(self.blocks):
            x = block(x)
            if i == layer:
                break
        patch_tokens = x[:, 1:, :]
        return patch_tokens.reshape(x.shape[0], gh, gw, self.spec.dim)

    def global_token(self, images: torch.Tensor, layer: int) -> torch.Tensor:
        """Class token after block `layer`: B x dim."""
        x, _ = self.tokens(images)
        for i, block in enumerate(self.blocks):
            x = block(x)
            if i == layer:
                break
        return x[:, 0, :]
