import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from config.settings import SAMPLE_COUNTS
from models.geometry import BoundingBox, VoxelGrid
from utils.exceptions import raise_invalid_input

SPLITS = ("train", "val", "test")


@dataclass(eq=False)
class FieldSamples:
    """
    Implicit-field supervision for one part at one resolution tag.

    Attributes:
        points: (N, 3) float32 points in part-local [0, 1]^3
        values: (N,) float32 inside-probabilities, 1 inside and 0 outside
        resolution_tag: 16, 32 or 64
    """

    points: np.ndarray
    values: np.ndarray
    resolution_tag: int

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float32).reshape(-1, 3)
        self.values = np.asarray(self.values, dtype=np.float32).reshape(-1)
        if self.resolution_tag not in SAMPLE_COUNTS:
            raise_invalid_input(f"Unsupported resolution tag: {self.resolution_tag}")
        if len(self.points) != len(self.values):
            raise_invalid_input(
                f"FieldSamples has {len(self.points)} points but {len(self.values)} values"
            )
        expected = SAMPLE_COUNTS[self.resolution_tag]
        if len(self.points) != expected:
            raise_invalid_input(
                f"FieldSamples at tag {self.resolution_tag} needs {expected} points, "
                f"got {len(self.points)}"
            )

    def inside_fraction(self) -> float:
        return float((self.values >= 0.5).mean())


@dataclass(eq=False)
class PartRecord:
    """One part of one shape: its normalized volume, its box and field samples."""

    volume64: VoxelGrid
    box: BoundingBox
    samples: Dict[int, FieldSamples] = field(default_factory=dict)

    def __post_init__(self):
        if self.volume64.resolution != 64:
            raise_invalid_input(
                f"Part volume must be 64^3, got {self.volume64.resolution}^3"
            )
        if self.volume64.is_empty():
            raise_invalid_input("Part volume is empty")

    def require_samples(self, resolution_tag: int) -> FieldSamples:
        if resolution_tag not in self.samples:
            raise_invalid_input(f"Part is missing field samples for tag {resolution_tag}")
        return self.samples[resolution_tag]


@dataclass(eq=False)
class ShapeRecord:
    """An ordered part sequence plus the solid shape it assembles into."""

    shape_id: str
    category: str
    split: str
    parts: List[PartRecord]
    shape_voxels: VoxelGrid
    depth_views: List["DepthImage"] = field(default_factory=list)
    rgb_views: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise_invalid_input(f"Unknown split tag: {self.split}")

    @property
    def part_count(self) -> int:
        return len(self.parts)

    def validate(self, k_max: int) -> "ShapeRecord":
        if not 2 <= self.part_count <= k_max:
            raise_invalid_input(
                f"Shape {self.shape_id} has {self.part_count} parts; expected 2..{k_max}"
            )
        for part in self.parts:
            part.box.validate(self.shape_voxels.resolution)
        return self

    def boxes(self) -> List[BoundingBox]:
        return [part.box for part in self.parts]

    def digest(self) -> str:
        """Content hash over geometry, boxes and samples."""
        h = hashlib.sha256()
        h.update(f"{self.shape_id}|{self.category}|{self.split}".encode("utf-8"))
        h.update(np.packbits(self.shape_voxels.occupancy).tobytes())
        for part in self.parts:
            h.update(np.packbits(part.volume64.occupancy).tobytes())
            h.update(part.box.to_vector().astype("<f8").tobytes())
            for tag in sorted(part.samples):
                h.update(part.samples[tag].points.astype("<f4").tobytes())
                h.update(part.samples[tag].values.astype("<f4").tobytes())
        for view in self.depth_views:
            h.update(view.values.astype("<f4").tobytes())
        return h.hexdigest()

    def to_dict(self):
        return {
            "shape_id": self.shape_id,
            "category": self.category,
            "split": self.split,
            "part_count": self.part_count,
            "order": list(range(self.part_count)),
            "boxes": [part.box.to_dict() for part in self.parts],
            "resolution_tags": sorted(self.parts[0].samples) if self.parts else [],
            "digest": self.digest(),
        }


@dataclass(eq=False)
class DepthImage:
    """Orthographic depth map, 1.0 where the ray misses."""

    values: np.ndarray
    view_index: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise_invalid_input(f"Depth image must be 2-D, got {self.values.shape}")
        if self.values.min() < 0.0 or self.values.max() > 1.0:
            raise_invalid_input("Depth values must lie in [0, 1]")
        if not 0 <= self.view_index:
            raise_invalid_input(f"Invalid view index: {self.view_index}")

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    def hit_mask(self) -> np.ndarray:
        return self.values < 1.0


def find_record(records: List[ShapeRecord], shape_id: str) -> Optional[ShapeRecord]:
    return next((r for r in records if r.shape_id == shape_id), None)
