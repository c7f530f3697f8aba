"""Teacher feature extraction, timestep ensembling and teacher fusion."""
from __future__ import annotations

import numpy as np

from ..core.ops import l2_normalize
from ..core.types import FeatureMap, Image
from ..errors import EmptyList, GridMismatch, NotNormalized, ShapeMismatch
from .backends import (
    DiffusionBackendConfig,
    ViTBackendConfig,
    backend_patch_size,
    format_prompt,
    get_backend,
)


def extract_vit(image: Image, cfg: ViTBackendConfig) -> FeatureMap:
    """Run a ViT backend on the image; grid must match input_size / patch."""
    backend = get_backend(cfg.backend_id)
    data = backend.extract(image, cfg.layer, cfg.input_size, cfg.feature_dim)
    patch = backend_patch_size(cfg.backend_id)
    expected = (cfg.input_size[0] // patch, cfg.input_size[1] // patch)
    if data.shape[:2] != expected or data.shape[2] != cfg.feature_dim:
        raise ShapeMismatch(
            f"backend {cfg.backend_id} returned {data.shape}, expected {expected} x {cfg.feature_dim}"
        )
    return FeatureMap(data=data, image_size=image.size)


def extract_diffusion(image: Image, timestep: int, cfg: DiffusionBackendConfig) -> FeatureMap:
    """Run a diffusion backend at one forward-noising timestep."""
    backend = get_backend(cfg.backend_id)
    prompt = format_prompt(cfg.prompt_template, image.category)
    data = backend.extract(image, int(timestep), cfg.layer, cfg.input_size, cfg.feature_dim, prompt=prompt)
    if data.ndim != 3 or data.shape[2] != cfg.feature_dim:
        raise ShapeMismatch(f"backend {cfg.backend_id} returned {data.shape}")
    return FeatureMap(data=data, image_size=image.size)


def ensemble_timesteps(maps: list[FeatureMap]) -> FeatureMap:
    """Element-wise arithmetic mean of same-shape maps."""
    if not maps:
        raise EmptyList("cannot ensemble zero feature maps")
    shape = maps[0].data.shape
    size = maps[0].image_size
    for m in maps[1:]:
        if m.data.shape != shape:
            raise ShapeMismatch(f"map shape {m.data.shape} != {shape}")
    stack = np.stack([m.data.astype(np.float64) for m in maps], axis=0)
    return FeatureMap(data=stack.mean(axis=0).astype(np.float32), image_size=size)


def fuse_teachers(vit: FeatureMap, diff: FeatureMap) -> FeatureMap:
    """Depth-concatenate two per-location-normalized maps and renormalize.

    With unit-length halves the fused cosine similarity equals the mean of
    the per-teacher cosine similarities.
    """
    if vit.grid != diff.grid:
        raise GridMismatch(f"vit grid {vit.grid} != diffusion grid {diff.grid}")
    if not (vit.normalized and diff.normalized):
        raise NotNormalized("fuse_teachers requires per-location normalized inputs")
    fused = np.concatenate([vit.data, diff.data], axis=-1)
    return l2_normalize(FeatureMap(data=fused, image_size=vit.image_size))


def teacher_feature_map(
    image: Image,
    vit_cfg: ViTBackendConfig,
    diff_cfg: DiffusionBackendConfig,
) -> FeatureMap:
    """Full teacher path: ViT map fused with the timestep-ensembled diffusion map.

    Raw diffusion maps are averaged over the configured timesteps first,
    then each teacher is normalized per location, then fused.
    """
    vit_fm = l2_normalize(extract_vit(image, vit_cfg))
    diff_maps = [extract_diffusion(image, t, diff_cfg) for t in diff_cfg.timesteps]
    diff_fm = l2_normalize(ensemble_timesteps(diff_maps))
    return fuse_teachers(vit_fm, diff_fm)
