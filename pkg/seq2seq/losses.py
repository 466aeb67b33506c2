"""
Sequence autoencoder losses.

Per shape with k parts:
    reconstruction = (1/k) sum_i [beta * |g'_i - g_i|^2 + |b'_i - b_i|^2]
    stop           = (1/k) sum_i BCE(s'_i, s_i), s_i = 1 only at i = k
    total          = batch mean of reconstruction + alpha * stop
"""

from typing import Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from models.sequences import DecodedStep, StepVector
from utils.exceptions import raise_invalid_input


def stop_labels(lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    positions = torch.arange(max_len, device=lengths.device)[None, :]
    return (positions == (lengths[:, None] - 1)).to(torch.get_default_dtype())


def reconstruction_loss_tensor(
    pred_g: torch.Tensor,
    pred_b: torch.Tensor,
    true_g: torch.Tensor,
    true_b: torch.Tensor,
    lengths: torch.Tensor,
    beta: float,
) -> torch.Tensor:
    """Per-shape reconstruction loss (B,), padded steps masked out."""
    mask = (torch.arange(pred_g.shape[1], device=lengths.device)[None, :] < lengths[:, None]).to(pred_g.dtype)
    per_step = beta * ((pred_g - true_g) ** 2).sum(-1) + ((pred_b - true_b) ** 2).sum(-1)
    return (per_step * mask).sum(1) / lengths.to(pred_g.dtype)


def stop_loss_tensor(stop_logits: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Per-shape stop loss (B,) from logits, padded steps masked out."""
    max_len = stop_logits.shape[1]
    mask = (torch.arange(max_len, device=lengths.device)[None, :] < lengths[:, None]).to(stop_logits.dtype)
    labels = stop_labels(lengths, max_len).to(stop_logits.dtype)
    bce = F.binary_cross_entropy_with_logits(stop_logits, labels, reduction="none")
    return (bce * mask).sum(1) / lengths.to(stop_logits.dtype)


def total_loss_tensor(recon: torch.Tensor, stop: torch.Tensor, alpha: float) -> torch.Tensor:
    return (recon + alpha * stop).mean()


def loss_reconstruction(
    pred: Sequence[DecodedStep], truth: Sequence[StepVector], beta: float = 1.0
) -> float:
    if len(pred) != len(truth):
        raise_invalid_input(f"Prediction has {len(pred)} steps, truth has {len(truth)}")
    if not pred:
        raise_invalid_input("Reconstruction loss needs at least one step")
    total = 0.0
    for p, t in zip(pred, truth):
        dg = p.g.astype(np.float64) - t.g.astype(np.float64)
        db = p.b.astype(np.float64) - t.b.astype(np.float64)
        total += beta * float(dg @ dg) + float(db @ db)
    return total / len(pred)


def loss_stop(pred_signs: Sequence[float], k: int) -> float:
    signs = np.asarray(pred_signs, dtype=np.float64).reshape(-1)
    if len(signs) != k or k < 1:
        raise_invalid_input(f"Expected {k} stop probabilities, got {len(signs)}")
    if np.any(signs <= 0.0) or np.any(signs >= 1.0):
        raise_invalid_input("Stop probabilities must lie strictly inside (0, 1)")
    labels = np.zeros(k)
    labels[-1] = 1.0
    bce = -labels * np.log(signs) - (1.0 - labels) * np.log(1.0 - signs)
    return float(bce.mean())


def loss_total(
    reconstruction: Union[float, Sequence[float]],
    stop: Union[float, Sequence[float]],
    alpha: float = 0.01,
) -> float:
    """Batch mean of reconstruction + alpha * stop over per-shape terms."""
    r = np.atleast_1d(np.asarray(reconstruction, dtype=np.float64))
    s = np.atleast_1d(np.asarray(stop, dtype=np.float64))
    if r.shape != s.shape:
        raise_invalid_input("Reconstruction and stop terms must pair up per shape")
    if np.any(r < 0) or np.any(s < 0):
        raise_invalid_input("Loss terms must be non-negative")
    return float(np.mean(r + alpha * s))
