import numpy as np
from scipy.spatial import cKDTree

from models.geometry import Mesh, PointCloud, VoxelGrid
from utils.exceptions import raise_invalid_input


def iou(a: VoxelGrid, b: VoxelGrid) -> float:
    """|a & b| / |a | b|, 1 when both grids are empty."""
    if a.resolution != b.resolution:
        raise_invalid_input(f"IoU of {a.resolution}^3 and {b.resolution}^3 grids")
    x = a.occupancy.astype(bool)
    y = b.occupancy.astype(bool)
    union = np.count_nonzero(x | y)
    if union == 0:
        return 1.0
    return np.count_nonzero(x & y) / union


def _nearest_sq(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    # exact k-d tree search, squared distance recomputed from the matched point
    _, idx = cKDTree(dst).query(src, k=1)
    return ((src - dst[idx]) ** 2).sum(axis=1)


def chamfer(a: PointCloud, b: PointCloud) -> float:
    """Mean squared nearest distance a -> b plus the same for b -> a."""
    if len(a) == 0 or len(b) == 0:
        raise_invalid_input("Chamfer distance of an empty cloud")
    return float(_nearest_sq(a.points, b.points).mean() + _nearest_sq(b.points, a.points).mean())


def sample_surface(mesh: Mesh, count: int, seed: int) -> PointCloud:
    """Area-weighted uniform samples on a triangle mesh."""
    if mesh.is_empty():
        raise_invalid_input("Cannot sample an empty mesh")
    if count < 1:
        raise_invalid_input(f"count must be >= 1, got {count}")
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0:
        raise_invalid_input("Mesh has zero surface area")

    rng = np.random.default_rng(seed)
    faces = rng.choice(len(areas), size=count, p=areas / total)
    r1 = np.sqrt(rng.random(count))[:, None]
    r2 = rng.random(count)[:, None]
    a, b, c = (mesh.vertices[mesh.triangles[faces, i]] for i in range(3))
    return PointCloud((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c)
