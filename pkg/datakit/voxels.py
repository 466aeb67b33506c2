from typing import Union

import numpy as np
from scipy import ndimage

from models.geometry import Mesh, VoxelGrid, is_power_of_two
from utils.exceptions import raise_invalid_input
from utils.logging_config import get_logger

logger = get_logger(__name__)

VERTEX_EPS = 1e-6
# slack on separating-axis comparisons; cells that only touch a triangle count
SAT_EPS = 1e-9

_AXES = np.eye(3)


def _as_triangles(mesh: Union[Mesh, np.ndarray]) -> np.ndarray:
    if isinstance(mesh, Mesh):
        return mesh.vertices[mesh.triangles]
    triangles = np.asarray(mesh, dtype=np.float64)
    if triangles.ndim != 3 or triangles.shape[1:] != (3, 3):
        raise_invalid_input(f"Expected (M, 3, 3) triangles, got {triangles.shape}")
    return triangles


def _triangle_box_overlap(
    tri: np.ndarray, centers: np.ndarray, half: float
) -> np.ndarray:
    """
    Separating-axis test of one triangle against many equal cubes.

    Args:
        tri: (3, 3) triangle vertices
        centers: (C, 3) cube centers
        half: cube half-extent

    Returns:
        (C,) bool mask, True where the closed triangle meets the closed cube
    """
    v = tri[None, :, :] - centers[:, None, :]  # (C, 3, 3)
    edges = (tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2])
    overlap = np.ones(len(centers), dtype=bool)

    # box face normals
    lo = v.min(axis=1)
    hi = v.max(axis=1)
    overlap &= np.all(lo <= half + SAT_EPS, axis=1) & np.all(hi >= -half - SAT_EPS, axis=1)

    # triangle normal
    normal = np.cross(edges[0], edges[1])
    d = v[:, 0, :] @ normal
    r = half * np.abs(normal).sum()
    overlap &= np.abs(d) <= r + SAT_EPS

    # edge cross products
    for e in edges:
        for axis in _AXES:
            a = np.cross(axis, e)
            if not a.any():
                continue
            p = v @ a  # (C, 3)
            r = half * np.abs(a).sum()
            overlap &= (p.min(axis=1) <= r + SAT_EPS) & (p.max(axis=1) >= -r - SAT_EPS)
    return overlap


def voxelize_mesh(mesh: Union[Mesh, np.ndarray], resolution: int) -> VoxelGrid:
    """
    Surface-voxelize a triangle mesh normalized to the unit cube.

    A cell is occupied iff at least one triangle intersects it, boundaries
    included.

    Args:
        mesh: Mesh or (M, 3, 3) triangle array with vertices in [0, 1]^3
        resolution: Cells per axis, a power of two >= 8

    Returns:
        Surface VoxelGrid (hollow; see flood_fill_interior)
    """
    if resolution < 8 or not is_power_of_two(resolution):
        raise_invalid_input(f"Resolution must be a power of two >= 8, got {resolution}")
    triangles = _as_triangles(mesh)
    if len(triangles) == 0:
        raise_invalid_input("Cannot voxelize an empty mesh")
    if triangles.min() < -VERTEX_EPS or triangles.max() > 1.0 + VERTEX_EPS:
        raise_invalid_input("Mesh vertices must lie in [0, 1]^3")

    occupancy = np.zeros((resolution,) * 3, dtype=np.uint8)
    half = 0.5 / resolution
    scaled = triangles * resolution
    for tri, tri_scaled in zip(triangles, scaled):
        lo = np.clip(np.ceil(tri_scaled.min(axis=0)).astype(int) - 1, 0, resolution - 1)
        hi = np.clip(np.floor(tri_scaled.max(axis=0)).astype(int), 0, resolution - 1)
        ranges = [np.arange(lo[a], hi[a] + 1) for a in range(3)]
        idx = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, 3)
        centers = (idx + 0.5) / resolution
        hit = idx[_triangle_box_overlap(tri, centers, half)]
        occupancy[hit[:, 0], hit[:, 1], hit[:, 2]] = 1

    logger.debug(f"Voxelized {len(triangles)} triangles into {occupancy.sum()} cells")
    return VoxelGrid(occupancy)


def flood_fill_interior(grid: VoxelGrid) -> VoxelGrid:
    """Fill every empty cell not 6-connected to the grid boundary through empty cells."""
    filled = ndimage.binary_fill_holes(grid.occupancy.astype(bool))
    return VoxelGrid(filled.astype(np.uint8))


def downsample(grid: VoxelGrid, target_resolution: int) -> VoxelGrid:
    """Max-pool: a target cell is occupied iff any covered source cell is."""
    source = grid.resolution
    if target_resolution <= 0 or source % target_resolution:
        raise_invalid_input(
            f"Target resolution {target_resolution} does not divide {source}"
        )
    f = source // target_resolution
    t = target_resolution
    pooled = grid.occupancy.reshape(t, f, t, f, t, f).max(axis=(1, 3, 5))
    return VoxelGrid(pooled)


def upsample(grid: VoxelGrid, target_resolution: int) -> VoxelGrid:
    """Nearest-neighbor upsampling by an integer factor."""
    source = grid.resolution
    if target_resolution % source:
        raise_invalid_input(
            f"Source resolution {source} does not divide {target_resolution}"
        )
    f = target_resolution // source
    occ = grid.occupancy
    for axis in range(3):
        occ = np.repeat(occ, f, axis=axis)
    return VoxelGrid(occ)
