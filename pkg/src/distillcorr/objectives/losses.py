"""Similarity maps, tempered softmax, and the two training objectives.

The distillation objective treats the teacher's tempered row distributions
as the weighting distribution P and the student's as the log argument T:

    loss = mean over source rows of  -sum_j P_ij * log T_ij

The fine-tuning objective does the same with Gaussian correspondence
targets as P and the tempered predicted similarity rows as T. Both are
implemented once on torch tensors (so training and the finite-difference
gradient checks share one formula); the typed wrappers below convert from
the numpy value types and delegate.
"""
from __future__ import annotations

from typing import Union

import numpy as np
import torch

from ..core.types import FeatureMap, SimilarityMap
from ..errors import (
    EmptyCorrespondences,
    NonPositiveTau,
    NotNormalized,
    ShapeMismatch,
)
from .targets import CorrespondenceMap


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if tau <= 0.0:
        raise NonPositiveTau(f"temperature must be > 0, got {tau}")
    return tau


# --- tensor implementations (gradient-capable) ---

def similarity_tensor(fa: torch.Tensor, fb: torch.Tensor) -> torch.Tensor:
    """Row-major flattened dot products: (Ha*Wa) x (Hb*Wb).

    Inputs are Hf x Wf x D (or already flattened M x D) descriptor grids,
    assumed unit-length per location.
    """
    a = fa.reshape(-1, fa.shape[-1])
    b = fb.reshape(-1, fb.shape[-1])
    return a @ b.transpose(0, 1)


def tempered_softmax_tensor(s: torch.Tensor, tau: float) -> torch.Tensor:
    return torch.softmax(s / _check_tau(tau), dim=-1)


def distill_loss_tensor(s_teacher: torch.Tensor, s_student: torch.Tensor, tau: float) -> torch.Tensor:
    """Mean over rows of CE(teacher row distribution, student row distribution)."""
    tau = _check_tau(tau)
    if s_teacher.shape != s_student.shape:
        raise ShapeMismatch(f"teacher {tuple(s_teacher.shape)} vs student {tuple(s_student.shape)}")
    p = torch.softmax(s_teacher.detach() / tau, dim=-1)
    log_t = torch.log_softmax(s_student / tau, dim=-1)
    return -(p * log_t).sum(dim=-1).mean()


def finetune_loss_tensor(
    f1: torch.Tensor,
    f2: torch.Tensor,
    targets: torch.Tensor,
    source_indices: torch.Tensor,
    tau: float,
) -> torch.Tensor:
    """CE between Gaussian target slices and tempered predicted rows.

    f1, f2: Hf x Wf x D unit-length grids; targets: N x (H2*W2) rows summing
    to 1; source_indices: N flattened row indices into f1's grid.
    """
    tau = _check_tau(tau)
    if targets.shape[0] == 0:
        raise EmptyCorrespondences("no correspondence points")
    sim = similarity_tensor(f1, f2)
    if targets.shape[1] != sim.shape[1]:
        raise ShapeMismatch(f"target rows {tuple(targets.shape)} vs similarity {tuple(sim.shape)}")
    rows = sim.index_select(0, source_indices)
    log_t = torch.log_softmax(rows / tau, dim=-1)
    return -(targets * log_t).sum(dim=-1).mean()


# --- typed wrappers over the core value types ---

def similarity_map(fa: FeatureMap, fb: FeatureMap) -> SimilarityMap:
    """Cosine similarity of all descriptor pairs; requires normalized maps."""
    if not (fa.normalized and fb.normalized):
        raise NotNormalized("similarity_map requires l2-normalized feature maps")
    s = similarity_tensor(torch.from_numpy(fa.flat()), torch.from_numpy(fb.flat()))
    return SimilarityMap(data=s.numpy(), source_grid=fa.grid, target_grid=fb.grid)


def tempered_softmax(s: Union[SimilarityMap, np.ndarray], tau: float) -> np.ndarray:
    """Row-stochastic matrix softmax(row / tau)."""
    data = s.data if isinstance(s, SimilarityMap) else np.asarray(s)
    t = tempered_softmax_tensor(torch.from_numpy(np.asarray(data, dtype=np.float64)), tau)
    return t.numpy()


def distill_loss(s_teacher: SimilarityMap, s_student: SimilarityMap, tau: float) -> float:
    if s_teacher.data.shape != s_student.data.shape:
        raise ShapeMismatch(
            f"teacher {s_teacher.data.shape} vs student {s_student.data.shape}"
        )
    val = distill_loss_tensor(
        torch.from_numpy(s_teacher.data.astype(np.float64)),
        torch.from_numpy(s_student.data.astype(np.float64)),
        tau,
    )
    return float(val)


def finetune_loss(f1: FeatureMap, f2: FeatureMap, targets: CorrespondenceMap, tau: float) -> float:
    if not (f1.normalized and f2.normalized):
        raise NotNormalized("finetune_loss requires l2-normalized feature maps")
    if targets.grid != f2.grid:
        raise ShapeMismatch(f"target grid {targets.grid} vs feature grid {f2.grid}")
    n = targets.targets.shape[0]
    if n == 0:
        raise EmptyCorrespondences("no correspondence points")
    gh, gw = f1.grid
    idx = []
    for r, c in targets.source_points:
        ri, ci = int(round(r)), int(round(c))
        if not (0 <= ri < gh and 0 <= ci < gw):
            raise ShapeMismatch(f"source point ({r}, {c}) outside {gh}x{gw} grid")
        idx.append(ri * gw + ci)
    val = finetune_loss_tensor(
        torch.from_numpy(f1.data.astype(np.float64)),
        torch.from_numpy(f2.data.astype(np.float64)),
        torch.from_numpy(targets.targets.reshape(n, -1).astype(np.float64)),
        torch.tensor(idx, dtype=torch.long),
        tau,
    )
    return float(val)
