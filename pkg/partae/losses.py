from typing import Sequence

import numpy as np
import torch

from utils.exceptions import raise_invalid_input


def part_loss_tensor(predicted: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared error over every sampled point in the batch."""
    return ((predicted - target) ** 2).mean()


def loss_part(predicted: Sequence[float], target: Sequence[float]) -> float:
    predicted = np.asarray(predicted, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if len(predicted) != len(target):
        raise_invalid_input(
            f"Predicted and target lengths differ: {len(predicted)} vs {len(target)}"
        )
    if len(predicted) == 0:
        raise_invalid_input("Loss needs at least one point")
    return float(((predicted - target) ** 2).mean())
