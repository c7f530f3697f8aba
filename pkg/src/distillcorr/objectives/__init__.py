from .losses import (
    distill_loss,
    distill_loss_tensor,
    finetune_loss,
    finetune_loss_tensor,
    similarity_map,
    similarity_tensor,
    tempered_softmax,
    tempered_softmax_tensor,
)
from .targets import CorrespondenceMap, gaussian_targets

__all__ = [
    "distill_loss",
    "distill_loss_tensor",
    "finetune_loss",
    "finetune_loss_tensor",
    "similarity_map",
    "similarity_tensor",
    "tempered_softmax",
    "tempered_softmax_tensor",
    "CorrespondenceMap",
    "gaussian_targets",
]
