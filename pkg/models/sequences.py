from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from models.geometry import BoundingBox
from utils.exceptions import raise_invalid_input


@dataclass(eq=False)
class StepVector:
    """
    One encoder timestep S_i = [g; b; t].

    Attributes:
        g: part geometry code
        b: box 6-vector [x, y, z, l, m, n]
        t: one-hot over K_max, hot index = part count - 1
    """

    g: np.ndarray
    b: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=np.float32).reshape(-1)
        self.b = np.asarray(self.b, dtype=np.float32).reshape(6)
        self.t = np.asarray(self.t, dtype=np.float32).reshape(-1)
        if np.count_nonzero(self.t == 1.0) != 1 or np.count_nonzero(self.t) != 1:
            raise_invalid_input("Part-count vector t must be one-hot")

    def __len__(self) -> int:
        return len(self.g) + 6 + len(self.t)

    @property
    def part_count(self) -> int:
        return int(np.argmax(self.t)) + 1

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.g, self.b, self.t]).astype(np.float32)

    @classmethod
    def from_array(cls, array, code_dim: int, k_max: int) -> "StepVector":
        array = np.asarray(array, dtype=np.float32).reshape(-1)
        if len(array) != code_dim + 6 + k_max:
            raise_invalid_input(
                f"Step array has length {len(array)}, expected {code_dim + 6 + k_max}"
            )
        return cls(
            g=array[:code_dim],
            b=array[code_dim : code_dim + 6],
            t=array[code_dim + 6 :],
        )

    def with_count(self, count: int) -> "StepVector":
        t = np.zeros_like(self.t)
        t[count - 1] = 1.0
        return StepVector(g=self.g.copy(), b=self.b.copy(), t=t)


@dataclass(eq=False)
class DecodedStep:
    """Decoder output for one timestep: geometry code, box and stop probability."""

    g: np.ndarray
    b: np.ndarray
    s: float

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=np.float32).reshape(-1)
        self.b = np.asarray(self.b, dtype=np.float32).reshape(6)
        self.s = float(self.s)

    @property
    def box(self) -> BoundingBox:
        return BoundingBox.from_vector(self.b)

    def equals(self, other: "DecodedStep") -> bool:
        return (
            np.array_equal(self.g, other.g)
            and np.array_equal(self.b, other.b)
            and self.s == other.s
        )

    def to_dict(self):
        return {"box": self.b.tolist(), "stop": self.s}


def steps_equal(a: List[DecodedStep], b: List[DecodedStep]) -> bool:
    return len(a) == len(b) and all(x.equals(y) for x, y in zip(a, b))


def box_mse(steps: List[DecodedStep], boxes: List[np.ndarray]) -> Optional[float]:
    """Mean squared box error over aligned steps, None when the lengths differ."""
    if len(steps) != len(boxes):
        return None
    pred = np.stack([s.b for s in steps]).astype(np.float64)
    truth = np.stack([np.asarray(b, dtype=np.float64) for b in boxes])
    return float(((pred - truth) ** 2).mean())
