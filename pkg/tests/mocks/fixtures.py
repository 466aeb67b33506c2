"""Tiny dataset builders."""

from typing import List, Sequence

import numpy as np

from datakit.synth import SynthSpec, build_shape_record, synth_corpus
from models.geometry import BoundingBox
from models.records import ShapeRecord
from models.sequences import StepVector
from seq2seq.steps import one_hot_count


def box_mask(lo, hi, resolution: int = 64) -> np.ndarray:
    """Solid box of cells lo..hi inclusive."""
    mask = np.zeros((resolution,) * 3, dtype=np.uint8)
    mask[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1] = 1
    return mask


def ball_mask(center, radius: float, resolution: int = 64) -> np.ndarray:
    idx = np.indices((resolution,) * 3).transpose(1, 2, 3, 0) + 0.5
    return (np.linalg.norm(idx - np.asarray(center), axis=-1) <= radius).astype(np.uint8)


def two_ball_record(shape_id: str = "toy_00000", split: str = "train", seed: int = 0) -> ShapeRecord:
    masks = [ball_mask((20, 32, 32), 9.0), ball_mask((44, 32, 32), 9.0)]
    return build_shape_record(shape_id, "chair", split, masks, seed, resolution_tags=(16,))


def synthetic_chairs(count: int, seed: int = 0, tags=(16,), depth_views: bool = False) -> List[ShapeRecord]:
    return synth_corpus(
        SynthSpec(categories=["chair"], count=count, seed=seed, resolution_tags=tags, depth_views=depth_views)
    )


def random_steps(count: int, code_dim: int, k_max: int, seed: int = 0) -> List[StepVector]:
    rng = np.random.default_rng(seed)
    t = one_hot_count(count, k_max)
    steps = []
    for _ in range(count):
        lo = rng.uniform(0.05, 0.45, size=3)
        size = rng.uniform(0.1, 0.5, size=3)
        steps.append(StepVector(g=rng.random(code_dim), b=np.concatenate([lo + size / 2, size]), t=t))
    return steps


def random_clouds(n: int, points: int, seed: int) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.random((points, 3)) for _ in range(n)]


def as_boxes(vectors: Sequence[Sequence[float]]) -> List[BoundingBox]:
    return [BoundingBox.from_vector(v) for v in vectors]
