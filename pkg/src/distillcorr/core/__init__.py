from .types import (
    BoundingBox,
    CorrespondencePair,
    FeatureMap,
    Image,
    Keypoint,
    SimilarityMap,
)
from .ops import bilinear_sample, grid_to_image, image_to_grid, l2_normalize, rescale_point
from .imageio import hflip_image, load_image, resize_image, save_image
from .manifest import PairRecord, iter_manifest, read_manifest, write_manifest

__all__ = [
    "BoundingBox",
    "CorrespondencePair",
    "FeatureMap",
    "Image",
    "Keypoint",
    "SimilarityMap",
    "bilinear_sample",
    "grid_to_image",
    "image_to_grid",
    "l2_normalize",
    "rescale_point",
    "hflip_image",
    "load_image",
    "resize_image",
    "save_image",
    "PairRecord",
    "iter_manifest",
    "read_manifest",
    "write_manifest",
]
