"""Low-rank adapters over frozen linear projections.

The adapted forward is y = W x + B (A x): no extra scale factor on the
low-rank branch, B starts at zero (the adapted model is the frozen model at
initialization), dropout acts on the branch input only during training.
"""
from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ShapeMismatch

LORA_A_INIT_STD = 0.02


def _init_ab(rank: int, in_features: int, out_features: int, gen: torch.Generator):
    a = torch.randn((rank, in_features), generator=gen) * LORA_A_INIT_STD
    b = torch.zeros((out_features, rank))
    return nn.Parameter(a), nn.Parameter(b)


class LoRALinear(nn.Module):
    """Frozen d x k linear W plus trainable factors A (r x k), B (d x r)."""

    def __init__(self, base: nn.Linear, rank: int, dropout: float = 0.0, seed: int = 0):
        super().__init__()
        d, k = base.out_features, base.in_features
        if rank < 1 or rank > min(d, k) // 4:
            raise ValueError(f"rank {rank} must be in [1, min(d,k)/4] = [1, {min(d, k) // 4}]")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.rank = rank
        gen = torch.Generator().manual_seed(seed)
        self.lora_a, self.lora_b = _init_ab(rank, k, d, gen)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.base.in_features:
            raise ShapeMismatch(f"input width {x.shape[-1]} != {self.base.in_features}")
        delta = F.linear(F.linear(self.dropout(x), self.lora_a), self.lora_b)
        return self.base(x) + delta

    def delta_weight(self) -> torch.Tensor:
        """Materialized B @ A, same shape as the frozen weight."""
        return self.lora_b @ self.lora_a

    def merged_linear(self) -> nn.Linear:
        """Plain linear with W + BA folded in."""
        out = nn.Linear(self.base.in_features, self.base.out_features, bias=self.base.bias is not None)
        with torch.no_grad():
            out.weight.copy_(self.base.weight + self.delta_weight())
            if self.base.bias is not None:
                out.bias.copy_(self.base.bias)
        return out


class SliceLoRALinear(nn.Module):
    """LoRA over the q and v slices of a fused qkv projection (k untouched).

    Algebraically identical to adapting separate Q and V projections: the
    low-rank update adds into output rows [0, d) and [2d, 3d) only.
    """

    def __init__(self, base: nn.Linear, rank: int, dropout: float = 0.0, seed: int = 0):
        super().__init__()
        if base.out_features % 3:
            raise ShapeMismatch("fused qkv projection must have out_features divisible by 3")
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.dim = base.out_features // 3
        self.rank = rank
        k = base.in_features
        gen = torch.Generator().manual_seed(seed)
        self.q_a, self.q_b = _init_ab(rank, k, self.dim, gen)
        self.v_a, self.v_b = _init_ab(rank, k, self.dim, gen)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.base(x)
        xd = self.dropout(x)
        dq = F.linear(F.linear(xd, self.q_a), self.q_b)
        dv = F.linear(F.linear(xd, self.v_a), self.v_b)
        zero = torch.zeros_like(dq)
        return out + torch.cat([dq, zero, dv], dim=-1)

    def delta_weight(self) -> torch.Tensor:
        delta = torch.zeros_like(self.base.weight)
        delta[: self.dim] = self.q_b @ self.q_a
        delta[2 * self.dim :] = self.v_b @ self.v_a
        return delta

    def merged_linear(self) -> nn.Linear:
        out = nn.Linear(self.base.in_features, self.base.out_features, bias=self.base.bias is not None)
        with torch.no_grad():
            out.weight.copy_(self.base.weight + self.delta_weight())
            if self.base.bias is not None:
                out.bias.copy_(self.base.bias)
        return out


def lora_forward(layer: LoRALinear, x: torch.Tensor) -> torch.Tensor:
    """Functional alias: y = W x + B (A x)."""
    return layer(x)
