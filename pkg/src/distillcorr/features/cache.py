"""On-disk feature cache: raw float32 tensors with JSON sidecars.

Layout: <dir>/<key>.bin (little-endian float32, C order) plus
<dir>/<key>.json holding shape, image size, normalized flag, creation time
and the originating config. Keys are SHA-256 over the canonicalized config
tuple, so identical inputs always map to the same entry. Writes go through
a temp file + rename, so concurrent readers never observe partial entries.

The cache directory defaults to the DISTILLCORR_CACHE environment variable
when set; the CLI exposes `--feature-cache DIR`.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from pathlib import Path
from typing import Optional

import numpy as np

from ..core.types import FeatureMap
from ..errors import IOFailure

ENV_CACHE_DIR = "DISTILLCORR_CACHE"


def make_cache_key(
    image_id: str,
    backend_id: str,
    layer: int,
    input_size: tuple[int, int],
    timesteps: tuple[int, ...] = (),
) -> str:
    """Pure function of the extraction inputs."""
    payload = json.dumps(
        {
            "image_id": image_id,
            "backend_id": backend_id,
            "layer": int(layer),
            "input_size": [int(input_size[0]), int(input_size[1])],
            "timesteps": [int(t) for t in timesteps],
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def default_cache_dir(explicit: Optional[str] = None) -> Optional[Path]:
    if explicit:
        return Path(explicit)
    env = os.environ.get(ENV_CACHE_DIR)
    return Path(env) if env else None


class FeatureCache:
    def __init__(self, directory):
        self.directory = Path(directory)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IOFailure(f"cannot create cache directory {directory}: {exc}") from exc

    def _paths(self, key: str) -> tuple[Path, Path]:
        return self.directory / f"{key}.bin", self.directory / f"{key}.json"

    def put(self, key: str, fm: FeatureMap, config: Optional[dict] = None) -> None:
        bin_path, json_path = self._paths(key)
        data = np.ascontiguousarray(fm.data, dtype="<f4")
        sidecar = {
            "shape": list(data.shape),
            "image_size": list(fm.image_size),
            "normalized": bool(fm.normalized),
            "created_at": time.time(),
            "config": config or {},
        }
        try:
            fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "wb") as f:
                f.write(data.tobytes())
            os.replace(tmp, bin_path)
            fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "w") as f:
                json.dump(sidecar, f)
            os.replace(tmp, json_path)
        except OSError as exc:
            raise IOFailure(f"cannot write cache entry {key}: {exc}") from exc

    def get(self, key: str) -> Optional[FeatureMap]:
        """Bit-exact round trip of put(); misses return None."""
        bin_path, json_path = self._paths(key)
        if not (bin_path.exists() and json_path.exists()):
            return None
        try:
            with open(json_path) as f:
                sidecar = json.load(f)
            raw = np.fromfile(bin_path, dtype="<f4").reshape(sidecar["shape"])
        except (OSError, ValueError, KeyError):
            return None
        return FeatureMap(
            data=raw,
            image_size=tuple(sidecar["image_size"]),
            normalized=bool(sidecar.get("normalized", False)),
        )
