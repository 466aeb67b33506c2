from typing import List, Sequence

import numpy as np

from models.sequences import StepVector
from utils.exceptions import raise_invalid_input

MODES = ("autoencode", "complete", "denoise")


def drop_parts(steps: Sequence[StepVector], rng: np.random.Generator) -> List[StepVector]:
    """
    Remove r ~ U{0, .., k-1} parts, keeping the rest in order.

    The count one-hot of every kept step is re-encoded to the number kept.
    """
    k = len(steps)
    if k == 0:
        raise_invalid_input("Cannot corrupt an empty sequence")
    removed = int(rng.integers(0, k))
    keep = np.sort(rng.choice(k, size=k - removed, replace=False))
    return [steps[i].with_count(k - removed) for i in keep]


def scramble_parts(steps: Sequence[StepVector], rng: np.random.Generator) -> List[StepVector]:
    if len(steps) == 0:
        raise_invalid_input("Cannot corrupt an empty sequence")
    return [steps[i] for i in rng.permutation(len(steps))]


def corrupt(steps: Sequence[StepVector], mode: str, rng: np.random.Generator) -> List[StepVector]:
    if mode == "autoencode":
        return list(steps)
    if mode == "complete":
        return drop_parts(steps, rng)
    if mode == "denoise":
        return scramble_parts(steps, rng)
    raise_invalid_input(f"Unknown training mode: {mode}")
