from .backends import (
    DiffusionBackendConfig,
    MockDiffusionBackend,
    MockViTBackend,
    ViTBackendConfig,
    backend_patch_size,
    format_prompt,
    get_backend,
)
from .cache import ENV_CACHE_DIR, FeatureCache, default_cache_dir, make_cache_key
from .extract import (
    ensemble_timesteps,
    extract_diffusion,
    extract_vit,
    fuse_teachers,
    teacher_feature_map,
)

__all__ = [
    "DiffusionBackendConfig",
    "MockDiffusionBackend",
    "MockViTBackend",
    "ViTBackendConfig",
    "backend_patch_size",
    "format_prompt",
    "get_backend",
    "ENV_CACHE_DIR",
    "FeatureCache",
    "default_cache_dir",
    "make_cache_key",
    "ensemble_timesteps",
    "extract_diffusion",
    "extract_vit",
    "fuse_teachers",
    "teacher_feature_map",
]
