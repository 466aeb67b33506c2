"""
Ingest pre-extracted PartNet-style parts.

Two per-shape layouts are accepted under

    <root>/<category>/<split>/<shape_id>/

Dataset layout (what `prepare` writes):

    manifest.json           {"part_count": K, "order": [k, ...], ...}
    part_<k>.vox            normalized 64^3 part volume
    part_<k>.box            6 little-endian float64: x y z l m n
    samples_<k>_<res>.bin   optional; sampled when missing
    shape.vox               optional; the union of the placed parts otherwise

Mask layout:

    manifest.json           {"parts": ["<mask file>", ...], "shape": "<optional vox>"}
    <mask files>            PQVX grids at a power-of-two resolution >= 64

"order" (or the "parts" list) is the natural part order and is kept as-is.
A part that cannot be used, including one that fills its whole box and so
has no surface to sample, is skipped and reported; the shape survives if at
least two parts remain.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from datakit.formats import read_box, read_samples, read_vox
from datakit.parts import extract_part, place_part
from datakit.render import VIEW_COUNT, render_depth, render_rgb
from datakit.synth import populate_samples
from datakit.voxels import downsample, flood_fill_interior
from models.geometry import VoxelGrid
from models.records import SPLITS, PartRecord, ShapeRecord
from utils.exceptions import InvalidInput, raise_invalid_input
from utils.file_utils import read_json
from utils.logging_config import get_logger
from utils.utils import derive_seed

logger = get_logger(__name__)

SHAPE_RESOLUTION = 64
PART_ERRORS = (InvalidInput, OSError, ValueError, KeyError)


@dataclass
class IngestSummary:
    shapes_seen: int = 0
    shapes_kept: int = 0
    dropped_over_k_max: List[str] = field(default_factory=list)
    dropped_too_few_parts: List[str] = field(default_factory=list)
    skipped_parts: List[Tuple[str, str, str]] = field(default_factory=list)

    def to_dict(self):
        return {
            "shapes_seen": self.shapes_seen,
            "shapes_kept": self.shapes_kept,
            "dropped_over_k_max": self.dropped_over_k_max,
            "dropped_too_few_parts": self.dropped_too_few_parts,
            "skipped_parts": [
                {"shape_id": s, "entry": e, "reason": r} for s, e, r in self.skipped_parts
            ],
        }


def _to_shape_resolution(grid: VoxelGrid) -> VoxelGrid:
    grid.require_power_of_two()
    if grid.resolution < SHAPE_RESOLUTION:
        raise_invalid_input(f"Mask resolution {grid.resolution} is below {SHAPE_RESOLUTION}")
    if grid.resolution == SHAPE_RESOLUTION:
        return grid
    return downsample(grid, SHAPE_RESOLUTION)


class PartNetIngester:
    def __init__(
        self,
        root: Path,
        category: str,
        k_max: int = 10,
        resolution_tags: Sequence[int] = (16, 32, 64),
        seed: int = 0,
        depth_views: bool = True,
        rgb_views: bool = False,
    ):
        self.root = Path(root)
        self.category = category
        self.k_max = k_max
        self.resolution_tags = tuple(resolution_tags)
        self.seed = seed
        self.depth_views = depth_views
        self.rgb_views = rgb_views
        self.summary = IngestSummary()

    def _shape_dirs(self) -> List[Tuple[str, Path]]:
        category_dir = self.root / self.category
        if not self.root.is_dir() or not category_dir.is_dir():
            raise_invalid_input(f"No {self.category} directory under {self.root}")
        found = []
        for split_dir in sorted(p for p in category_dir.iterdir() if p.is_dir()):
            if split_dir.name not in SPLITS:
                logger.warning(f"Ignoring unknown split directory {split_dir}")
                continue
            found.extend(
                (split_dir.name, d) for d in sorted(split_dir.iterdir()) if d.is_dir()
            )
        if not found:
            raise_invalid_input(f"No shape directories under {category_dir}")
        return found

    def _skip(self, shape_id: str, entry, error: Exception) -> None:
        logger.warning(f"Skipping part {entry} of {shape_id}: {error}")
        self.summary.skipped_parts.append((shape_id, str(entry), str(error)))

    def _sampled(self, shape_id: str, entry, part: PartRecord, seed: int, directory=None, k=None):
        """Fill the scheduled samples, reading stored ones when present."""
        try:
            for tag in self.resolution_tags:
                stored = directory / f"samples_{k}_{tag}.bin" if directory is not None else None
                if stored is not None and stored.exists():
                    part.samples[tag] = read_samples(stored, tag)
            missing = [t for t in self.resolution_tags if t not in part.samples]
            return populate_samples(part, missing, seed)
        except PART_ERRORS as e:
            self._skip(shape_id, entry, e)
            return None

    def _dataset_parts(self, shape_id: str, directory: Path, manifest) -> List[PartRecord]:
        count = manifest["part_count"]
        if not isinstance(count, int) or count < 0:
            raise_invalid_input(f"Bad part_count in {directory / 'manifest.json'}: {count!r}")
        order = manifest.get("order", list(range(count)))
        if sorted(order) != list(range(count)):
            raise_invalid_input(f"order {order} is not a permutation of {count} parts")

        parts = []
        for k in order:
            entry = f"part_{k}"
            try:
                part = PartRecord(
                    volume64=read_vox(directory / f"{entry}.vox"),
                    box=read_box(directory / f"{entry}.box"),
                )
            except PART_ERRORS as e:
                self._skip(shape_id, entry, e)
                continue
            seed = derive_seed(self.seed, self.category, shape_id, k)
            part = self._sampled(shape_id, entry, part, seed, directory, k)
            if part is not None:
                parts.append(part)
        return parts

    def _mask_parts(self, shape_id: str, directory: Path, entries) -> Tuple[List[np.ndarray], List]:
        masks, names = [], []
        for entry in entries:
            try:
                if not isinstance(entry, str):
                    raise InvalidInput(f"entry is not a file name: {entry!r}")
                grid = _to_shape_resolution(read_vox(directory / entry))
                if grid.is_empty():
                    raise InvalidInput("mask is empty")
                masks.append(grid.occupancy)
                names.append(entry)
            except PART_ERRORS as e:
                self._skip(shape_id, entry, e)
        return masks, names

    def _extracted(self, shape_id: str, shape: VoxelGrid, masks, names) -> List[PartRecord]:
        parts = []
        for k, (mask, name) in enumerate(zip(masks, names)):
            try:
                part = extract_part(shape, VoxelGrid(mask))
            except InvalidInput as e:
                self._skip(shape_id, name, e)
                continue
            part = self._sampled(shape_id, name, part, derive_seed(self.seed, self.category, shape_id, k))
            if part is not None:
                parts.append(part)
        return parts

    def _given_shape(self, directory: Path, name: Optional[str]) -> Optional[VoxelGrid]:
        if name and (directory / name).exists():
            return _to_shape_resolution(read_vox(directory / name))
        return None

    def _ingest_shape(self, split: str, directory: Path) -> Optional[ShapeRecord]:
        shape_id = directory.name
        manifest_path = directory / "manifest.json"
        if not manifest_path.exists():
            raise_invalid_input(f"Missing manifest: {manifest_path}")
        manifest = read_json(manifest_path)

        if "part_count" in manifest:
            parts = self._dataset_parts(shape_id, directory, manifest)
            shape = self._given_shape(directory, "shape.vox")
            if shape is None and parts:
                union = np.zeros((SHAPE_RESOLUTION,) * 3, dtype=np.uint8)
                for part in parts:
                    union |= place_part(part.volume64, part.box, SHAPE_RESOLUTION).occupancy
                shape = flood_fill_interior(VoxelGrid(union))
        elif isinstance(manifest.get("parts"), list):
            masks, names = self._mask_parts(shape_id, directory, manifest["parts"])
            union = np.zeros((SHAPE_RESOLUTION,) * 3, dtype=np.uint8)
            for mask in masks:
                union |= mask
            shape = flood_fill_interior(VoxelGrid(union))
            given = self._given_shape(directory, manifest.get("shape"))
            if given is not None:
                shape = VoxelGrid(given.occupancy | union)
            parts = self._extracted(shape_id, shape, masks, names) if masks else []
        else:
            raise_invalid_input(f"Manifest has neither part_count nor a parts list: {manifest_path}")

        if len(parts) > self.k_max:
            self.summary.dropped_over_k_max.append(shape_id)
            logger.info(f"Dropping {shape_id}: {len(parts)} parts > K_max={self.k_max}")
            return None
        if len(parts) < 2:
            self.summary.dropped_too_few_parts.append(shape_id)
            logger.warning(f"Dropping {shape_id}: only {len(parts)} usable parts")
            return None

        record = ShapeRecord(
            shape_id=shape_id,
            category=self.category,
            split=split,
            parts=parts,
            shape_voxels=shape,
        )
        self._render(record)
        return record.validate(self.k_max)

    def _render(self, record: ShapeRecord) -> None:
        shape = record.shape_voxels
        if self.depth_views:
            record.depth_views = [render_depth(shape, v) for v in range(VIEW_COUNT)]
        if self.rgb_views:
            labels = np.zeros_like(shape.occupancy, dtype=np.int32)
            for k, part in enumerate(record.parts):
                placed = place_part(part.volume64, part.box, shape.resolution).occupancy
                labels[(placed > 0) & (shape.occupancy > 0)] = k + 1
            record.rgb_views = [render_rgb(shape, v, labels=labels) for v in range(VIEW_COUNT)]

    def ingest(self) -> List[ShapeRecord]:
        logger.info(f"[*] Ingesting {self.category} shapes from {self.root}...")
        records = []
        for split, directory in self._shape_dirs():
            self.summary.shapes_seen += 1
            record = self._ingest_shape(split, directory)
            if record is not None:
                records.append(record)
        self.summary.shapes_kept = len(records)
        logger.info(
            f"Ingested {len(records)}/{self.summary.shapes_seen} shapes, "
            f"{len(self.summary.skipped_parts)} parts skipped"
        )
        return records


def ingest_partnet(root: Path, category: str, k_max: int = 10, **kwargs) -> List[ShapeRecord]:
    return PartNetIngester(root, category, k_max, **kwargs).ingest()
