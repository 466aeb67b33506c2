from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from utils.exceptions import raise_invalid_input


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(eq=False)
class VoxelGrid:
    """
    Binary occupancy cube indexed [x, y, z], y pointing up.

    Cell (i, j, k) covers [i, i+1] x [j, j+1] x [k, k+1] / resolution of the
    unit cube; its center is ((i, j, k) + 0.5) / resolution.

    Attributes:
        occupancy: uint8 array of shape (r, r, r), values exactly 0 or 1
    """

    occupancy: np.ndarray

    def __post_init__(self):
        occ = np.asarray(self.occupancy)
        if occ.ndim != 3 or len(set(occ.shape)) != 1:
            raise_invalid_input(f"Voxel grid must be a cube, got shape {occ.shape}")
        if occ.dtype != np.uint8:
            if occ.dtype == bool or np.isin(occ, (0, 1)).all():
                occ = occ.astype(np.uint8)
            else:
                raise_invalid_input("Voxel occupancy values must be 0 or 1")
        elif occ.max(initial=0) > 1:
            raise_invalid_input("Voxel occupancy values must be 0 or 1")
        self.occupancy = occ

    @property
    def resolution(self) -> int:
        return self.occupancy.shape[0]

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())

    def is_empty(self) -> bool:
        return self.count == 0

    def is_full(self) -> bool:
        return self.count == self.occupancy.size

    def equals(self, other: "VoxelGrid") -> bool:
        return np.array_equal(self.occupancy, other.occupancy)

    def require_resolution(self, *allowed: int) -> None:
        if self.resolution not in allowed:
            raise_invalid_input(
                f"Voxel grid resolution {self.resolution} not in {allowed}"
            )

    def require_power_of_two(self) -> None:
        if self.resolution < 8 or not is_power_of_two(self.resolution):
            raise_invalid_input(
                f"Voxel grid resolution must be a power of two >= 8, got {self.resolution}"
            )

    @classmethod
    def empty(cls, resolution: int) -> "VoxelGrid":
        return cls(np.zeros((resolution,) * 3, dtype=np.uint8))

    @classmethod
    def full(cls, resolution: int) -> "VoxelGrid":
        return cls(np.ones((resolution,) * 3, dtype=np.uint8))

    def cell_centers(self) -> np.ndarray:
        """Centers of every cell as a (r, r, r, 3) array in [0, 1]."""
        return lattice_centers(self.resolution)


def lattice_centers(resolution: int) -> np.ndarray:
    axis = (np.arange(resolution, dtype=np.float64) + 0.5) / resolution
    xs, ys, zs = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([xs, ys, zs], axis=-1)


@dataclass(eq=False)
class BoundingBox:
    """
    Axis-aligned part box in normalized shape coordinates.

    Attributes:
        position: box center, each component in [0, 1]
        size: full extents, each component in (0, 1]
    """

    position: np.ndarray
    size: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        self.size = np.asarray(self.size, dtype=np.float64).reshape(3)

    @property
    def lo(self) -> np.ndarray:
        return self.position - self.size / 2.0

    @property
    def hi(self) -> np.ndarray:
        return self.position + self.size / 2.0

    def to_vector(self) -> np.ndarray:
        """The 6-vector [x, y, z, l, m, n]."""
        return np.concatenate([self.position, self.size])

    @classmethod
    def from_vector(cls, vector) -> "BoundingBox":
        vector = np.asarray(vector, dtype=np.float64).reshape(6)
        return cls(position=vector[:3], size=vector[3:])

    @classmethod
    def from_corners(cls, lo, hi) -> "BoundingBox":
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        return cls(position=(lo + hi) / 2.0, size=hi - lo)

    def is_valid(self, resolution: int = 64) -> bool:
        eps = 1.0 / resolution
        return bool(
            np.all(self.size > 0)
            and np.all(self.lo >= -eps)
            and np.all(self.hi <= 1.0 + eps)
        )

    def validate(self, resolution: int = 64) -> "BoundingBox":
        if not self.is_valid(resolution):
            raise_invalid_input(
                f"Box violates unit-cube bounds: position={self.position}, size={self.size}"
            )
        return self

    def clamped(self, resolution: int = 64) -> "BoundingBox":
        """
        Clamp to the unit cube keeping at least one cell of extent per axis.

        Regressed boxes can overshoot the cube or collapse; the result always
        satisfies the box invariants.
        """
        min_size = 1.0 / resolution
        lo = np.clip(self.lo, 0.0, 1.0 - min_size)
        hi = np.clip(self.hi, min_size, 1.0)
        hi = np.maximum(hi, lo + min_size)
        return BoundingBox.from_corners(lo, hi)

    def cell_range(self, resolution: int) -> Tuple[np.ndarray, np.ndarray]:
        """Inclusive index range of the lattice cells whose centers lie inside the box."""
        lo = np.ceil(self.lo * resolution - 0.5).astype(int)
        hi = np.floor(self.hi * resolution - 0.5).astype(int)
        # empty along an axis when hi < lo
        return np.maximum(lo, 0), np.minimum(hi, resolution - 1)

    def to_dict(self):
        return {"position": self.position.tolist(), "size": self.size.tolist()}


@dataclass(eq=False)
class Mesh:
    """Triangle mesh in normalized shape coordinates."""

    vertices: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    triangles: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 3), dtype=np.int64)
    )

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise_invalid_input("Mesh triangle indices out of range")

    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def to_trimesh(self):
        import trimesh

        return trimesh.Trimesh(
            vertices=self.vertices, faces=self.triangles, process=False
        )


@dataclass(eq=False)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if len(self.points) == 0:
            raise_invalid_input("Point cloud must contain at least one point")

    def __len__(self) -> int:
        return len(self.points)


def optional_array_equal(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> bool:
    if a is None or b is None:
        return a is b
    return np.array_equal(a, b)
