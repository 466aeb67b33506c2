"""
Mesh-based shape ingestion.

Input layout:

    <root>/<category>/<split>/<shape_id>/part_<k>.obj

Parts are taken in ascending k. All parts of a shape are normalized jointly
into the unit cube, surface-voxelized and flood-filled.
"""

from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from datakit.synth import build_shape_record
from datakit.voxels import flood_fill_interior, voxelize_mesh
from models.geometry import Mesh, VoxelGrid
from models.records import SPLITS, ShapeRecord
from utils.exceptions import InvalidInput, raise_invalid_input
from utils.logging_config import get_logger
from utils.utils import derive_seed

logger = get_logger(__name__)

NORMALIZE_MARGIN = 0.02


def read_obj(path: Path) -> Mesh:
    """Read vertices and faces from ASCII OBJ; polygons are fan-triangulated."""
    vertices, faces = [], []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            fields = line.split()
            if not fields:
                continue
            if fields[0] == "v":
                vertices.append([float(c) for c in fields[1:4]])
            elif fields[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in fields[1:]]
                idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                faces.extend([idx[0], idx[j], idx[j + 1]] for j in range(1, len(idx) - 1))
    return Mesh(vertices=np.array(vertices).reshape(-1, 3), triangles=np.array(faces, dtype=np.int64).reshape(-1, 3))


def write_obj(path: Path, meshes: Sequence[Mesh], group_names: Sequence[str] = ()) -> Path:
    """Write one OBJ with a `g <name>` group per mesh."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    offset = 1
    with open(path, "w", encoding="utf-8") as f:
        for i, mesh in enumerate(meshes):
            name = group_names[i] if i < len(group_names) else f"part_{i}"
            f.write(f"g {name}\n")
            for v in mesh.vertices:
                f.write(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}\n")
            for t in mesh.triangles:
                f.write(f"f {t[0] + offset} {t[1] + offset} {t[2] + offset}\n")
            offset += len(mesh.vertices)
    return path


def normalize_jointly(meshes: List[Mesh], margin: float = NORMALIZE_MARGIN) -> List[Mesh]:
    """Uniformly scale and center all meshes so their union fits [margin, 1 - margin]^3."""
    stacked = np.concatenate([m.vertices for m in meshes], axis=0)
    lo, hi = stacked.min(axis=0), stacked.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0:
        raise_invalid_input("Cannot normalize a degenerate mesh")
    scale = (1.0 - 2 * margin) / extent
    center = (lo + hi) / 2.0
    return [
        Mesh(vertices=(m.vertices - center) * scale + 0.5, triangles=m.triangles)
        for m in meshes
    ]


def masks_from_meshes(parts: List[Mesh], resolution: int = 64):
    """Shape grid and per-part masks (each flood-filled, intersected with the shape)."""
    parts = normalize_jointly(parts)
    all_triangles = np.concatenate([p.vertices[p.triangles] for p in parts], axis=0)
    shape = flood_fill_interior(voxelize_mesh(all_triangles, resolution))
    masks = [
        flood_fill_interior(voxelize_mesh(p, resolution)).occupancy & shape.occupancy
        for p in parts
    ]
    return shape, masks


def ingest_meshes(
    root: Path,
    category: str,
    k_max: int = 10,
    resolution_tags: Sequence[int] = (16, 32, 64),
    seed: int = 0,
    depth_views: bool = True,
    rgb_views: bool = False,
) -> List[ShapeRecord]:
    category_dir = Path(root) / category
    if not category_dir.is_dir():
        raise_invalid_input(f"No {category} directory under {root}")

    records = []
    for split_dir in sorted(p for p in category_dir.iterdir() if p.is_dir()):
        if split_dir.name not in SPLITS:
            continue
        for shape_dir in sorted(p for p in split_dir.iterdir() if p.is_dir()):
            files: Dict[int, Path] = {
                int(p.stem.split("_")[1]): p for p in shape_dir.glob("part_*.obj")
            }
            if not 2 <= len(files) <= k_max:
                logger.warning(f"Skipping {shape_dir.name}: {len(files)} part meshes")
                continue
            shape, masks = masks_from_meshes([read_obj(files[k]) for k in sorted(files)])
            if any(not m.any() for m in masks):
                logger.warning(f"Skipping {shape_dir.name}: a part voxelized to nothing")
                continue
            try:
                record = build_shape_record(
                    shape_id=shape_dir.name,
                    category=category,
                    split=split_dir.name,
                    masks=masks,
                    seed=derive_seed(seed, category, shape_dir.name),
                    resolution_tags=resolution_tags,
                    depth_views=depth_views,
                    rgb_views=rgb_views,
                    shape_voxels=shape,
                )
            except InvalidInput as e:
                logger.warning(f"Skipping {shape_dir.name}: {e}")
                continue
            records.append(record.validate(k_max))
    if not records:
        raise_invalid_input(f"No usable mesh shapes under {category_dir}")
    return records
