"""
Procedural part-assembled shapes for desk-scale training.

Every part is a primitive rasterized into its own integer cell range of a
64^3 grid, so parts of one shape never overlap. The eight corner blocks of
each part range are carved out; this keeps each normalized part volume from
being completely full at every sampling resolution while leaving its tight
box unchanged.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from config.settings import SUPPORTED_CATEGORIES
from datakit.parts import extract_part
from datakit.render import VIEW_COUNT, render_depth, render_rgb
from datakit.sampling import sample_field_points
from datakit.voxels import downsample, flood_fill_interior
from models.geometry import VoxelGrid
from models.records import PartRecord, ShapeRecord
from utils.exceptions import raise_invalid_input
from utils.logging_config import get_logger
from utils.utils import derive_seed

logger = get_logger(__name__)

GRID = 64
PART_ORDERS = ("natural", "top_down")


@dataclass
class SynthSpec:
    categories: Sequence[str]
    count: int
    seed: int = 0
    k_max: int = 10
    resolution_tags: Tuple[int, ...] = (16, 32, 64)
    depth_views: bool = True
    rgb_views: bool = False
    train_fraction: float = 0.8
    val_fraction: float = 0.1


@dataclass
class _Part:
    kind: str
    lo: Tuple[int, int, int]
    hi: Tuple[int, int, int]  # inclusive


def _carve_corners(mask: np.ndarray, lo, hi) -> None:
    n = np.array(hi) - np.array(lo) + 1
    m = -(-n // 16)
    for corner in np.ndindex(2, 2, 2):
        sl = []
        for a in range(3):
            if corner[a] == 0:
                sl.append(slice(lo[a], lo[a] + m[a]))
            else:
                sl.append(slice(hi[a] - m[a] + 1, hi[a] + 1))
        mask[tuple(sl)] = 0


def rasterize_part(part: _Part, resolution: int = GRID) -> np.ndarray:
    """Rasterize one primitive into its inclusive cell range."""
    lo = np.array(part.lo)
    hi = np.array(part.hi)
    if np.any(lo < 0) or np.any(hi >= resolution) or np.any(hi - lo < 2):
        raise_invalid_input(f"Primitive range out of bounds or too thin: {part}")

    mask = np.zeros((resolution,) * 3, dtype=np.uint8)
    ranges = [np.arange(lo[a], hi[a] + 1) + 0.5 for a in range(3)]
    center = (lo + hi + 1) / 2.0
    radius = (hi - lo + 1) / 2.0
    x, y, z = np.meshgrid(*ranges, indexing="ij")
    u = ((x - center[0]) / radius[0]) ** 2
    v = ((y - center[1]) / radius[1]) ** 2
    w = ((z - center[2]) / radius[2]) ** 2

    if part.kind == "box":
        inside = np.ones_like(u, dtype=bool)
    elif part.kind == "cylinder":
        inside = u + w <= 1.0
    elif part.kind == "ellipsoid":
        inside = u + v + w <= 1.0
    else:
        raise_invalid_input(f"Unknown primitive kind: {part.kind}")

    region = tuple(slice(lo[a], hi[a] + 1) for a in range(3))
    mask[region] = inside.astype(np.uint8)
    _carve_corners(mask, lo, hi)
    return mask


def _centered(width: int, center: int = GRID // 2) -> Tuple[int, int]:
    start = center - width // 2
    return start, start + width - 1


def _corner_legs(rng, x0, x1, z0, z1, top, thick) -> List[_Part]:
    kind = "cylinder" if rng.random() < 0.5 else "box"
    return [
        _Part(kind, (lx, 0, lz), (lx + thick - 1, top, lz + thick - 1))
        for lz in (z0, z1 - thick + 1)
        for lx in (x0, x1 - thick + 1)
    ]


def _legs(rng, n_legs, x0, x1, z0, z1, top) -> List[_Part]:
    thick = int(rng.integers(3, 7))
    if n_legs == 1:
        w = int(rng.integers(6, 11))
        cx0, cx1 = _centered(w, (x0 + x1 + 1) // 2)
        cz0, cz1 = _centered(w, (z0 + z1 + 1) // 2)
        return [_Part("cylinder", (cx0, 0, cz0), (cx1, top, cz1))]
    if n_legs == 2:
        return [
            _Part("box", (x0, 0, z0), (x0 + thick - 1, top, z1)),
            _Part("box", (x1 - thick + 1, 0, z0), (x1, top, z1)),
        ]
    if n_legs == 3:
        front = [
            _Part("cylinder", (lx, 0, z1 - thick + 1), (lx + thick - 1, top, z1))
            for lx in (x0, x1 - thick + 1)
        ]
        return front + [_Part("box", (x0, 0, z0), (x1, top, z0 + thick - 1))]
    return _corner_legs(rng, x0, x1, z0, z1, top, thick)


def _chair(rng) -> List[_Part]:
    """Back, seat, then 2-4 legs."""
    sx0, sx1 = _centered(int(rng.integers(28, 45)))
    sz0, sz1 = _centered(int(rng.integers(28, 45)))
    seat_y0 = int(rng.integers(18, 28))
    seat_y1 = seat_y0 + int(rng.integers(3, 7)) - 1
    back_y1 = seat_y1 + int(rng.integers(14, min(32, GRID - 1 - seat_y1) + 1))
    back_t = int(rng.integers(3, 7))
    back = _Part("box", (sx0, seat_y1 + 1, sz0), (sx1, back_y1, sz0 + back_t - 1))
    seat = _Part("box", (sx0, seat_y0, sz0), (sx1, seat_y1, sz1))
    legs = _legs(rng, int(rng.integers(2, 5)), sx0, sx1, sz0, sz1, seat_y0 - 1)
    return [back, seat] + legs


def _table(rng) -> List[_Part]:
    """Top, then 1-4 legs."""
    tx0, tx1 = _centered(int(rng.integers(36, 61)))
    tz0, tz1 = _centered(int(rng.integers(30, 57)))
    top_y0 = int(rng.integers(30, 51))
    top_y1 = top_y0 + int(rng.integers(3, 7)) - 1
    n_legs = int(rng.integers(1, 5))
    kind = "cylinder" if n_legs in (1, 3) and rng.random() < 0.5 else "box"
    top = _Part(kind, (tx0, top_y0, tz0), (tx1, top_y1, tz1))
    if kind == "cylinder":
        # keep legs under the round top
        inset_x = (tx1 - tx0 + 1) // 5
        inset_z = (tz1 - tz0 + 1) // 5
        tx0, tx1, tz0, tz1 = tx0 + inset_x, tx1 - inset_x, tz0 + inset_z, tz1 - inset_z
    return [top] + _legs(rng, n_legs, tx0, tx1, tz0, tz1, top_y0 - 1)


def _lamp(rng) -> List[_Part]:
    """Base, pole, then one or two heads."""
    bx0, bx1 = _centered(int(rng.integers(14, 27)))
    base_y1 = int(rng.integers(3, 6)) - 1
    base = _Part("cylinder", (bx0, 0, bx0), (bx1, base_y1, bx1))
    px0, px1 = _centered(int(rng.integers(3, 5)))
    pole_y1 = base_y1 + int(rng.integers(20, 41))
    pole = _Part("box", (px0, base_y1 + 1, px0), (px1, pole_y1, px1))
    head_y1 = min(pole_y1 + int(rng.integers(8, 17)), GRID - 1)
    hz0, hz1 = _centered(int(rng.integers(10, 19)))
    if rng.random() < 0.5:
        hx0, hx1 = _centered(int(rng.integers(12, 25)))
        heads = [_Part("ellipsoid", (hx0, pole_y1 + 1, hz0), (hx1, head_y1, hz1))]
    else:
        w = int(rng.integers(8, 13))
        heads = [
            _Part("ellipsoid", (GRID // 2 - w, pole_y1 + 1, hz0), (GRID // 2 - 1, head_y1, hz1)),
            _Part("ellipsoid", (GRID // 2, pole_y1 + 1, hz0), (GRID // 2 + w - 1, head_y1, hz1)),
        ]
    return [base, pole] + heads


CATEGORY_BUILDERS: Dict[str, Callable[[np.random.Generator], List[_Part]]] = {
    "chair": _chair,
    "table": _table,
    "lamp": _lamp,
}


def split_for_index(index: int, count: int, train_fraction: float, val_fraction: float) -> str:
    n_train = int(round(count * train_fraction))
    n_val = int(round(count * val_fraction))
    if index < n_train:
        return "train"
    if index < n_train + n_val:
        return "val"
    return "test"


def populate_samples(part: PartRecord, resolution_tags, seed: int) -> PartRecord:
    for tag in resolution_tags:
        volume = part.volume64 if tag == 64 else downsample(part.volume64, tag)
        part.samples[tag] = sample_field_points(volume, tag, derive_seed(seed, tag))
    return part


def build_shape_record(
    shape_id: str,
    category: str,
    split: str,
    masks: List[np.ndarray],
    seed: int,
    resolution_tags=(16, 32, 64),
    depth_views: bool = True,
    rgb_views: bool = False,
    shape_voxels: VoxelGrid = None,
) -> ShapeRecord:
    """Turn ordered part masks into a fully populated ShapeRecord."""
    if shape_voxels is None:
        union = np.zeros_like(masks[0])
        for mask in masks:
            union |= mask
        shape_voxels = flood_fill_interior(VoxelGrid(union))

    parts = []
    for k, mask in enumerate(masks):
        part = extract_part(shape_voxels, VoxelGrid(mask))
        parts.append(populate_samples(part, resolution_tags, derive_seed(seed, shape_id, k)))

    record = ShapeRecord(
        shape_id=shape_id,
        category=category,
        split=split,
        parts=parts,
        shape_voxels=shape_voxels,
    )
    if depth_views:
        record.depth_views = [render_depth(shape_voxels, v) for v in range(VIEW_COUNT)]
    if rgb_views:
        labels = np.zeros_like(shape_voxels.occupancy, dtype=np.int32)
        for k, mask in enumerate(masks):
            labels[mask > 0] = k + 1
        record.rgb_views = [
            render_rgb(shape_voxels, v, labels=labels) for v in range(VIEW_COUNT)
        ]
    return record


def synth_corpus(spec: SynthSpec) -> List[ShapeRecord]:
    """
    Generate `spec.count` shapes per category, deterministically from the seed.

    Returns:
        ShapeRecords in category then index order, parts in canonical order
    """
    if spec.count < 1:
        raise_invalid_input(f"count must be >= 1, got {spec.count}")
    unknown = set(spec.categories) - set(SUPPORTED_CATEGORIES)
    if unknown:
        raise_invalid_input(f"Unknown categories: {sorted(unknown)}")

    records: List[ShapeRecord] = []
    for category in spec.categories:
        logger.info(f"[*] Generating {spec.count} synthetic {category} shapes...")
        for index in range(spec.count):
            shape_seed = derive_seed(spec.seed, category, index)
            rng = np.random.default_rng(shape_seed)
            masks = [rasterize_part(p) for p in CATEGORY_BUILDERS[category](rng)]
            record = build_shape_record(
                shape_id=f"{category}_{index:05d}",
                category=category,
                split=split_for_index(
                    index, spec.count, spec.train_fraction, spec.val_fraction
                ),
                masks=masks,
                seed=shape_seed,
                resolution_tags=spec.resolution_tags,
                depth_views=spec.depth_views,
                rgb_views=spec.rgb_views,
            )
            records.append(record.validate(spec.k_max))
    return records


def order_parts(record: ShapeRecord, policy: str = "natural") -> ShapeRecord:
    """
    Reorder a shape's parts.

    natural keeps the ingested order; top_down sorts by descending box top,
    then by ascending x center.
    """
    if policy not in PART_ORDERS:
        raise_invalid_input(f"Unknown part order policy: {policy}")
    if policy == "natural":
        return record
    order = sorted(
        range(record.part_count),
        key=lambda k: (-round(float(record.parts[k].box.hi[1]), 9),
                       round(float(record.parts[k].box.position[0]), 9)),
    )
    return ShapeRecord(
        shape_id=record.shape_id,
        category=record.category,
        split=record.split,
        parts=[record.parts[k] for k in order],
        shape_voxels=record.shape_voxels,
        depth_views=record.depth_views,
        rgb_views=record.rgb_views,
    )
