from typing import List, Sequence, Tuple

import numpy as np
import torch

from models.records import ShapeRecord
from models.sequences import StepVector
from utils.exceptions import raise_invalid_input


def one_hot_count(count: int, k_max: int) -> np.ndarray:
    if not 1 <= count <= k_max:
        raise_invalid_input(f"Part count {count} outside 1..{k_max}")
    t = np.zeros(k_max, dtype=np.float32)
    t[count - 1] = 1.0
    return t


def assemble_step_vectors(
    shape: ShapeRecord, codes: Sequence[np.ndarray], k_max: int
) -> List[StepVector]:
    """One StepVector per part, in part order, all carrying the same count one-hot."""
    k = shape.part_count
    if len(codes) != k:
        raise_invalid_input(f"{len(codes)} codes for a {k}-part shape")
    if k > k_max:
        raise_invalid_input(f"Shape {shape.shape_id} has {k} parts > K_max={k_max}")
    t = one_hot_count(k, k_max)
    return [
        StepVector(g=code, b=part.box.to_vector(), t=t)
        for code, part in zip(codes, shape.parts)
    ]


def pack_steps(steps: Sequence[StepVector]) -> np.ndarray:
    """(k, code_dim + 6 + K_max) array."""
    if not steps:
        raise_invalid_input("Cannot pack an empty sequence")
    return np.stack([s.to_array() for s in steps])


def unpack_steps(array: np.ndarray, code_dim: int, k_max: int) -> List[StepVector]:
    return [StepVector.from_array(row, code_dim, k_max) for row in np.asarray(array)]


def pad_batch(sequences: Sequence[np.ndarray]) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Stack variable-length (k_i, D) arrays into a zero-padded (B, T, D) tensor.

    Returns:
        (padded batch, int64 lengths)
    """
    lengths = torch.tensor([len(s) for s in sequences], dtype=torch.int64)
    width = sequences[0].shape[1]
    batch = torch.zeros(len(sequences), int(lengths.max()), width)
    for i, seq in enumerate(sequences):
        batch[i, : len(seq)] = torch.from_numpy(np.asarray(seq, dtype=np.float32))
    return batch, lengths


def length_mask(lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    return torch.arange(max_len)[None, :] < lengths[:, None]
