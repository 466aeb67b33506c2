from typing import Tuple

import numpy as np

from models.geometry import BoundingBox, VoxelGrid
from models.records import PartRecord
from utils.exceptions import raise_invalid_input

PART_RESOLUTION = 64


def occupied_extent(grid: VoxelGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Inclusive min and max occupied cell index per axis."""
    idx = np.argwhere(grid.occupancy)
    return idx.min(axis=0), idx.max(axis=0)


def resample_indices(n: int, size: int = PART_RESOLUTION) -> np.ndarray:
    """Nearest-neighbor source index for each of `size` target cells over `n` source cells."""
    return (np.arange(size) * n) // size


def extract_part(shape_voxels: VoxelGrid, part_mask: VoxelGrid) -> PartRecord:
    """
    Crop a part to its tight box and rescale it to a 64^3 volume.

    The box is in normalized shape coordinates: lo = i0 / res and
    hi = (i1 + 1) / res per axis for the inclusive occupied index range.

    Returns:
        PartRecord with volume64 and box; samples are left empty
    """
    if part_mask.resolution != shape_voxels.resolution:
        raise_invalid_input("Part mask and shape grid resolutions differ")
    if part_mask.is_empty():
        raise_invalid_input("Part mask is empty")
    if np.any(part_mask.occupancy > shape_voxels.occupancy):
        raise_invalid_input("Part mask is not contained in the shape")

    res = shape_voxels.resolution
    i0, i1 = occupied_extent(part_mask)
    crop = part_mask.occupancy[i0[0] : i1[0] + 1, i0[1] : i1[1] + 1, i0[2] : i1[2] + 1]
    ix, iy, iz = (resample_indices(n) for n in crop.shape)
    volume64 = crop[np.ix_(ix, iy, iz)]

    box = BoundingBox.from_corners(i0 / res, (i1 + 1) / res)
    return PartRecord(volume64=VoxelGrid(volume64), box=box)


def place_part(volume64: VoxelGrid, box: BoundingBox, resolution: int) -> VoxelGrid:
    """
    Map a normalized part volume back into a shape grid through its box.

    When the box lies on the target lattice each target cell takes the first
    volume cell that extract_part sampled from it, which reproduces the
    original mask exactly; other boxes fall back to cell-center sampling.
    """
    grid = np.zeros((resolution,) * 3, dtype=np.uint8)
    lo_f = box.lo * resolution
    n_f = box.size * resolution
    lo = np.rint(lo_f).astype(int)
    n = np.rint(n_f).astype(int)
    aligned = np.allclose(lo_f, lo, atol=1e-6) and np.allclose(n_f, n, atol=1e-6)

    axes = []
    for a in range(3):
        if aligned:
            start, count = lo[a], max(n[a], 1)
            cells = np.arange(start, start + count)
            local = ((cells - start) * PART_RESOLUTION + count - 1) // count
        else:
            start = int(np.floor(lo_f[a]))
            stop = int(np.ceil(lo_f[a] + n_f[a]))
            cells = np.arange(start, stop)
            u = ((cells + 0.5) / resolution - box.lo[a]) / box.size[a]
            keep = (u >= 0.0) & (u < 1.0)
            cells = cells[keep]
            local = np.floor(u[keep] * PART_RESOLUTION).astype(int)
        keep = (cells >= 0) & (cells < resolution)
        axes.append((cells[keep], np.clip(local[keep], 0, PART_RESOLUTION - 1)))

    (cx, lx), (cy, ly), (cz, lz) = axes
    grid[np.ix_(cx, cy, cz)] = volume64.occupancy[np.ix_(lx, ly, lz)]
    return VoxelGrid(grid)
