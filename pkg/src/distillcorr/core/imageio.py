"""Image loading, resizing and horizontal flip (the only augmentations)."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image as PILImage

from .types import Image


def load_image(path, identifier: Optional[str] = None, category: Optional[str] = None) -> Image:
    """Load an RGB image file into float [0,1] pixels."""
    path = Path(path)
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return Image(pixels=arr, identifier=identifier or str(path), category=category)


def save_image(img_or_pixels, path) -> None:
    pixels = img_or_pixels.pixels if isinstance(img_or_pixels, Image) else np.asarray(img_or_pixels)
    arr = np.clip(np.asarray(pixels, dtype=np.float32), 0.0, 1.0)
    PILImage.fromarray((arr * 255.0 + 0.5).astype(np.uint8)).save(path)


def resize_image(img: Image, size: tuple[int, int]) -> Image:
    """Bilinear, half-pixel aligned resize to (height, width)."""
    h, w = size
    if img.size == (h, w):
        return img
    t = torch.from_numpy(np.ascontiguousarray(img.pixels)).permute(2, 0, 1).unsqueeze(0)
    out = F.interpolate(t, size=(h, w), mode="bilinear", align_corners=False)
    pixels = out.squeeze(0).permute(1, 2, 0).clamp_(0.0, 1.0).numpy()
    return Image(pixels=pixels, identifier=img.identifier, category=img.category)


def hflip_image(img: Image) -> Image:
    """Mirror pixel columns; identifier gains a '#hflip' suffix."""
    return Image(
        pixels=img.pixels[:, ::-1, :].copy(),
        identifier=img.identifier + "#hflip",
        category=img.category,
    )
