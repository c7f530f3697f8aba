"""Feature-extraction backends behind one uniform interface.

Mock backends ship in-tree and satisfy the full contract, so the whole
suite runs without foundation-model weights:

  mock-vit        fixed random linear map of non-overlapping patches,
                  applied to horizontally symmetrized patch content so a
                  flipped image yields exactly the grid-flipped map
  mock-diffusion  seeded Gaussian noise injection scaled by timestep,
                  followed by a fixed random per-patch linear map

Mock ids may carry a patch-size suffix, e.g. "mock-vit-p8" (default 14).
Real backends (DINOv2 via torch.hub) are resolved lazily and raise
BackendUnavailable when weights cannot be loaded.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core.imageio import resize_image
from ..core.types import Image
from ..errors import BackendUnavailable, InvalidTimestep

MOCK_MAX_TIMESTEP = 1000
MOCK_NOISE_SCALE = 0.5


@dataclass(frozen=True)
class ViTBackendConfig:
    backend_id: str
    layer: int
    input_size: tuple[int, int] = (434, 434)
    feature_dim: int = 768

    def __post_init__(self):
        if self.layer < 0:
            raise ValueError("layer must be >= 0")
        patch = backend_patch_size(self.backend_id)
        h, w = self.input_size
        if h % patch or w % patch:
            raise ValueError(f"input size {self.input_size} not divisible by patch {patch}")


@dataclass(frozen=True)
class DiffusionBackendConfig:
    backend_id: str
    layer: int
    input_size: tuple[int, int] = (980, 980)
    timesteps: tuple[int, ...] = (51, 101, 151, 201)
    prompt_template: str = "a photo of a [category]"
    feature_dim: int = 1280

    def __post_init__(self):
        object.__setattr__(self, "timesteps", tuple(int(t) for t in self.timesteps))
        ts = self.timesteps
        if not ts:
            raise ValueError("timesteps must be non-empty")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timesteps must be strictly increasing")


def format_prompt(template: str, category: Optional[str]) -> str:
    return template.replace("[category]", category or "object")


def _seed(*parts) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def backend_patch_size(backend_id: str) -> int:
    m = re.search(r"-p(\d+)$", backend_id)
    if m:
        return int(m.group(1))
    if backend_id.startswith("dinov2"):
        return 14
    if backend_id.startswith("mock-diffusion"):
        return 32
    return 14


def _patch_grid(input_size: tuple[int, int], patch: int) -> tuple[int, int]:
    """Nearest patch grid for the requested input size (exact when divisible)."""
    h, w = input_size
    return max(1, round(h / patch)), max(1, round(w / patch))


def _image_patches(image: Image, input_size: tuple[int, int], patch: int) -> np.ndarray:
    """(gh*gw) x (patch*patch*3) row-major patch matrix of the resized image."""
    gh, gw = _patch_grid(input_size, patch)
    resized = resize_image(image, (gh * patch, gw * patch))
    px = resized.pixels.reshape(gh, patch, gw, patch, 3)
    return px.transpose(0, 2, 1, 3, 4).reshape(gh * gw, patch * patch * 3)


def _symmetrize_patches(pixels: np.ndarray) -> np.ndarray:
    """Average each patch with its horizontal mirror; flip-invariant content."""
    gh_gw, flat = pixels.shape
    patch = int(round((flat // 3) ** 0.5))
    p = pixels.reshape(gh_gw, patch, patch, 3)
    return ((p + p[:, :, ::-1, :]) * 0.5).reshape(gh_gw, flat)


class MockViTBackend:
    """Per-patch fixed random projection; deterministic and flip-equivariant."""

    def __init__(self, backend_id: str):
        self.backend_id = backend_id
        self.patch_size = backend_patch_size(backend_id)

    def extract(self, image: Image, layer: int, input_size: tuple[int, int], feature_dim: int) -> np.ndarray:
        patch = self.patch_size
        patches = _symmetrize_patches(_image_patches(image, input_size, patch))
        rng = np.random.default_rng(_seed("mock-vit", self.backend_id, layer, feature_dim, patch))
        proj = rng.standard_normal((patches.shape[1], feature_dim)).astype(np.float32)
        proj /= np.sqrt(patches.shape[1])
        bias = rng.standard_normal(feature_dim).astype(np.float32) * 0.1
        gh, gw = _patch_grid(input_size, patch)
        feats = patches.astype(np.float32) @ proj + bias
        return feats.reshape(gh, gw, feature_dim)

    def global_embedding(self, image: Image, layer: int, input_size: tuple[int, int], feature_dim: int) -> np.ndarray:
        fm = self.extract(image, layer, input_size, feature_dim)
        return fm.mean(axis=(0, 1))


class MockDiffusionBackend:
    """Noise the image per timestep (seeded), then a fixed per-patch projection."""

    def __init__(self, backend_id: str):
        self.backend_id = backend_id
        self.patch_size = backend_patch_size(backend_id)
        self.max_timestep = MOCK_MAX_TIMESTEP

    def extract(
        self,
        image: Image,
        timestep: int,
        layer: int,
        input_size: tuple[int, int],
        feature_dim: int,
        prompt: str = "",
    ) -> np.ndarray:
        if not (0 <= timestep <= self.max_timestep):
            raise InvalidTimestep(f"timestep {timestep} outside [0, {self.max_timestep}]")
        patch = self.patch_size
        gh, gw = _patch_grid(input_size, patch)
        resized = resize_image(image, (gh * patch, gw * patch))
        pixels = resized.pixels
        if timestep > 0:
            rng = np.random.default_rng(_seed("mock-diffusion-noise", image.identifier, timestep))
            std = MOCK_NOISE_SCALE * timestep / self.max_timestep
            pixels = pixels + rng.standard_normal(pixels.shape).astype(np.float32) * std
        patches = pixels.reshape(gh, patch, gw, patch, 3).transpose(0, 2, 1, 3, 4).reshape(gh * gw, -1)
        rng_w = np.random.default_rng(_seed("mock-diffusion", self.backend_id, layer, feature_dim, patch))
        proj = rng_w.standard_normal((patches.shape[1], feature_dim)).astype(np.float32)
        proj /= np.sqrt(patches.shape[1])
        feats = patches.astype(np.float32) @ proj
        return feats.reshape(gh, gw, feature_dim)


class DINOv2Backend:
    """Adapter over torch.hub DINOv2; available only when weights resolve."""

    _HUB_NAMES = {
        "dinov2-b14": "dinov2_vitb14",
        "dinov2-b14-registers": "dinov2_vitb14_reg",
        "dinov2-s14": "dinov2_vits14",
        "dinov2-s14-registers": "dinov2_vits14_reg",
    }

    def __init__(self, backend_id: str):
        import torch

        if backend_id not in self._HUB_NAMES:
            raise BackendUnavailable(f"unknown DINOv2 variant {backend_id!r}")
        self.backend_id = backend_id
        self.patch_size = 14
        try:
            self.model = torch.hub.load("facebookresearch/dinov2", self._HUB_NAMES[backend_id])
        except Exception as exc:  # pragma: no cover - needs network/weights
            raise BackendUnavailable(f"cannot load {backend_id}: {exc}") from exc
        self.model.eval()

    def extract(self, image: Image, layer: int, input_size: tuple[int, int], feature_dim: int) -> np.ndarray:  # pragma: no cover
        import torch

        resized = resize_image(image, input_size)
        mean = np.array([0.485, 0.456, 0.406], dtype=np.float32)
        std = np.array([0.229, 0.224, 0.225], dtype=np.float32)
        arr = (resized.pixels - mean) / std
        t = torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)
        with torch.no_grad():
            out = self.model.get_intermediate_layers(t, n=[layer], reshape=True)[0]
        return out.squeeze(0).permute(1, 2, 0).numpy()

    def global_embedding(self, image: Image, layer: int, input_size: tuple[int, int], feature_dim: int) -> np.ndarray:  # pragma: no cover
        import torch

        resized = resize_image(image, input_size)
        mean = np.array([0.485, 0.456, 0.406], dtype=np.float32)
        std = np.array([0.229, 0.224, 0.225], dtype=np.float32)
        arr = (resized.pixels - mean) / std
        t = torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)
        with torch.no_grad():
            out = self.model(t)
        return out.squeeze(0).numpy()


_BACKEND_CACHE: dict[str, object] = {}


def get_backend(backend_id: str):
    """Resolve a backend id to a (cached) backend instance."""
    if backend_id in _BACKEND_CACHE:
        return _BACKEND_CACHE[backend_id]
    if backend_id.startswith("mock-vit"):
        backend = MockViTBackend(backend_id)
    elif backend_id.startswith("mock-diffusion"):
        backend = MockDiffusionBackend(backend_id)
    elif backend_id.startswith("dinov2"):
        backend = DINOv2Backend(backend_id)
    else:
        raise BackendUnavailable(f"no backend registered for id {backend_id!r}")
    _BACKEND_CACHE[backend_id] = backend
    return backend
