"""LoRA-adapted student model, optional linear head, adapter checkpoints."""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn as nn

from ..core.imageio import resize_image
from ..core.ops import l2_normalize
from ..core.types import FeatureMap, Image
from ..errors import BackendUnavailable, HeadAlreadyPresent, UnsupportedBackbone
from .backbone import ViTBackbone, resolve_spec
from .lora import LoRALinear, SliceLoRALinear

CHECKPOINT_SCHEMA_VERSION = 1


class LinearHead(nn.Module):
    """Per-location 2-layer head, the identity function at initialization.

    y = x + W2 GELU(W1 x + b1) + b2 with W2, b2 zero at init, so attaching
    the head is loss-neutral. With out_dim != in_dim the residual path is
    dropped and standard init applies (no identity contract possible).
    """

    def __init__(self, in_dim: int, width: int, dropout: float = 0.05, out_dim: Optional[int] = None, seed: int = 0):
        super().__init__()
        out_dim = out_dim or in_dim
        self.residual = out_dim == in_dim
        self.fc1 = nn.Linear(in_dim, width)
        self.act = nn.GELU()
        self.dropout = nn.Dropout(dropout)
        self.fc2 = nn.Linear(width, out_dim)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            self.fc1.weight.copy_(torch.randn(self.fc1.weight.shape, generator=gen) * 0.02)
            self.fc1.bias.zero_()
            if self.residual:
                self.fc2.weight.zero_()
            else:
                self.fc2.weight.copy_(torch.randn(self.fc2.weight.shape, generator=gen) * 0.02)
            self.fc2.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.fc2(self.dropout(self.act(self.fc1(x))))
        return x + h if self.residual else h

    def set_dropout(self, rate: float) -> None:
        self.dropout.p = float(rate)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def backbone_fingerprint(backbone: nn.Module, backbone_id: str) -> str:
    """Cheap stable hash of the frozen weights a checkpoint was trained on."""
    h = hashlib.sha256(backbone_id.encode())
    params = list(backbone.parameters())
    h.update(str(sum(p.numel() for p in params)).encode())
    for p in params[:8]:
        h.update(p.detach().reshape(-1)[:256].numpy().tobytes())
    return h.hexdigest()[:16]


def build_backbone(backbone_id: str) -> nn.Module:
    """Backbone registry: in-tree ViTs by spec id, DINOv2 via torch.hub."""
    if backbone_id.startswith("dinov2"):  # pragma: no cover - needs weights
        from ..features.backends import DINOv2Backend

        return DINOv2Backend(backbone_id).model
    return ViTBackbone(backbone_id)


class StudentModel(nn.Module):
    """Frozen backbone with LoRA on every block's Q and V projections."""

    def __init__(
        self,
        backbone: nn.Module,
        backbone_id: str,
        rank: int,
        dropout: float,
        extraction_layer: int,
        input_size: tuple[int, int],
        head: Optional[LinearHead] = None,
    ):
        super().__init__()
        self.backbone = backbone
        self.backbone_id = backbone_id
        self.rank = rank
        self.lora_dropout = dropout
        self.extraction_layer = extraction_layer
        self.input_size = tuple(int(v) for v in input_size)
        self.head = head
        self.lora: nn.ModuleDict = nn.ModuleDict()
        self.adapted_layers: list[tuple[int, str]] = []
        for p in self.backbone.parameters():
            p.requires_grad_(False)
        self._inject(rank, dropout)

    # -- wiring --

    def _inject(self, rank: int, dropout: float) -> None:
        blocks = getattr(self.backbone, "blocks", None)
        if blocks is None:
            raise UnsupportedBackbone(f"{self.backbone_id!r} exposes no transformer blocks")
        for i, block in enumerate(blocks):
            attn = getattr(block, "attn", None)
            if attn is None:
                raise UnsupportedBackbone(f"block {i} of {self.backbone_id!r} has no attention module")
            if hasattr(attn, "q_proj") and hasattr(attn, "v_proj"):
                for name, proj in (("query", "q_proj"), ("value", "v_proj")):
                    wrapped = LoRALinear(getattr(attn, proj), rank, dropout, seed=hash((i, name)) & 0x7FFFFFFF)
                    setattr(attn, proj, wrapped)
                    self.lora[f"block{i}.{name}"] = wrapped
                    self.adapted_layers.append((i, name))
            elif hasattr(attn, "qkv"):
                wrapped = SliceLoRALinear(attn.qkv, rank, dropout, seed=hash((i, "qkv")) & 0x7FFFFFFF)
                attn.qkv = wrapped
                self.lora[f"block{i}.qv"] = wrapped
                self.adapted_layers.extend([(i, "query"), (i, "value")])
            else:
                raise UnsupportedBackbone(
                    f"block {i} of {self.backbone_id!r} has no identifiable q/v projections"
                )

    # -- parameters --

    def trainable_parameters(self):
        for p in self.parameters():
            if p.requires_grad:
                yield p

    def adapter_parameter_count(self) -> int:
        total = 0
        for mod in self.lora.values():
            for name, p in mod.named_parameters():
                if p.requires_grad and "base" not in name:
                    total += p.numel()
        return total

    def trainable_parameter_count(self) -> int:
        return sum(p.numel() for p in self.trainable_parameters())

    # -- forward paths --

    def extract(self, images: torch.Tensor) -> torch.Tensor:
        """Feature grid B x gh x gw x D with gradients flowing to adapters."""
        grid = self.backbone.forward_grid(images, self.extraction_layer)
        if self.head is not None:
            grid = self.head(grid)
        return grid

    def extract_map(self, image: Image, normalized: bool = True) -> FeatureMap:
        """Inference-mode FeatureMap for one core Image."""
        was_training = self.training
        self.eval()
        try:
            resized = resize_image(image, self.input_size)
            t = torch.from_numpy(np.ascontiguousarray(resized.pixels)).permute(2, 0, 1).unsqueeze(0)
            with torch.no_grad():
                grid = self.extract(t).squeeze(0)
        finally:
            self.train(was_training)
        fm = FeatureMap(data=grid.numpy(), image_size=image.size)
        return l2_normalize(fm) if normalized else fm

    def fingerprint(self) -> str:
        return backbone_fingerprint(self.backbone, self.backbone_id)


def inject_lora(
    backbone_id: str,
    rank: int = 8,
    dropout: float = 0.05,
    extraction_layer: Optional[int] = None,
    input_size: Optional[tuple[int, int]] = None,
) -> StudentModel:
    """Wrap every block's Q and V projections; all other parameters frozen.

    At initialization the student's forward equals the frozen backbone's
    (B factors start at zero).
    """
    backbone = build_backbone(backbone_id)
    spec = resolve_spec(backbone_id) if not backbone_id.startswith("dinov2") else None
    if extraction_layer is None:
        extraction_layer = (spec.depth - 1) if spec else 11
    if input_size is None:
        side = spec.default_input if spec else 434
        input_size = (side, side)
    return StudentModel(backbone, backbone_id, rank, dropout, extraction_layer, input_size)


def merge_lora(model: StudentModel) -> StudentModel:
    """Fold adapters into plain backbone weights; head carried over.

    The returned student has no adapters; merging it again is the identity.
    """
    merged_backbone = build_backbone(model.backbone_id)
    merged_backbone.load_state_dict(_merged_state_dict(model))
    out = StudentModel(
        merged_backbone,
        model.backbone_id,
        rank=model.rank,
        dropout=0.0,
        extraction_layer=model.extraction_layer,
        input_size=model.input_size,
        head=model.head,
    )
    # a merged model carries its adaptation in the base weights; drop adapters
    for key in list(out.lora.keys()):
        mod = out.lora[key]
        with torch.no_grad():
            if isinstance(mod, LoRALinear):
                mod.lora_a.zero_()
                mod.lora_b.zero_()
            else:
                mod.q_a.zero_()
                mod.q_b.zero_()
                mod.v_a.zero_()
                mod.v_b.zero_()
    return out


def _merged_state_dict(model: StudentModel) -> dict:
    """Backbone state dict with every adapter's BA added into its base weight."""
    plain = build_backbone(model.backbone_id)
    state = plain.state_dict()
    ref = dict(model.backbone.state_dict())
    for key in state:
        # adapted projections live under base.*
        src = key
        for prefix in ("weight", "bias"):
            pass
        if key in ref:
            state[key] = ref[key].clone()
    for name, module in model.backbone.named_modules():
        if isinstance(module, (LoRALinear, SliceLoRALinear)):
            weight_key = f"{name}.weight"
            state[weight_key] = (module.base.weight + module.delta_weight()).detach().clone()
            if module.base.bias is not None:
                state[f"{name}.bias"] = module.base.bias.detach().clone()
    return state


def attach_head(model: StudentModel, width: int = 768, dropout: float = 0.05, out_dim: Optional[int] = None) -> StudentModel:
    """Add the per-location 2-layer head (identity at init)."""
    if model.head is not None:
        raise HeadAlreadyPresent("model already carries a head")
    spec_dim = model.extract(torch.zeros(1, 3, *model.input_size)).shape[-1]
    model.head = LinearHead(spec_dim, width, dropout=dropout, out_dim=out_dim)
    return model


def save_checkpoint(
    model: StudentModel,
    path,
    optimizer: Optional[torch.optim.Optimizer] = None,
    epoch: int = 0,
    config_fingerprint: str = "",
    metric_history: Optional[list] = None,
) -> None:
    """Adapters + head only; never the backbone weights."""
    payload = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "backbone_id": model.backbone_id,
        "backbone_fingerprint": model.fingerprint(),
        "rank": model.rank,
        "adapted_layers": model.adapted_layers,
        "extraction_layer": model.extraction_layer,
        "input_size": model.input_size,
        "lora_state": model.lora.state_dict(),
        "head_state": model.head.state_dict() if model.head is not None else None,
        "head_config": (
            {
                "in_dim": model.head.fc1.in_features,
                "width": model.head.fc1.out_features,
                "out_dim": model.head.fc2.out_features,
                "dropout": model.head.dropout.p,
            }
            if model.head is not None
            else None
        ),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "epoch": epoch,
        "config_fingerprint": config_fingerprint,
        "metric_history": metric_history or [],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path, map_location="cpu") -> tuple[StudentModel, dict]:
    """Rebuild the student and verify the backbone fingerprint."""
    payload = torch.load(path, map_location=map_location, weights_only=False)
    if payload.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(f"unsupported checkpoint schema {payload.get('schema_version')!r}")
    model = inject_lora(
        payload["backbone_id"],
        rank=payload["rank"],
        extraction_layer=payload["extraction_layer"],
        input_size=tuple(payload["input_size"]),
    )
    if model.fingerprint() != payload["backbone_fingerprint"]:
        raise BackendUnavailable(
            "checkpoint was trained against a different backbone "
            f"({payload['backbone_fingerprint']} != {model.fingerprint()})"
        )
    model.lora.load_state_dict(payload["lora_state"])
    if payload.get("head_state") is not None:
        hc = payload["head_config"]
        model.head = LinearHead(hc["in_dim"], hc["width"], dropout=hc["dropout"], out_dim=hc["out_dim"])
        model.head.load_state_dict(payload["head_state"])
    return model, payload
