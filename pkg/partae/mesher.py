from typing import Callable, Optional, Union

import numpy as np
from skimage import measure

from models.geometry import Mesh, VoxelGrid, lattice_centers
from partae.networks import PartAutoEncoder, decode_points
from utils.exceptions import raise_invalid_input
from utils.logging_config import get_logger

logger = get_logger(__name__)

MESH_RESOLUTIONS = (32, 64, 128, 256)
DEGENERATE_AREA = 1e-12

FieldFn = Callable[[np.ndarray], np.ndarray]


def field_lattice(field_fn: FieldFn, resolution: int) -> np.ndarray:
    """Evaluate a point field at every cell center of a resolution^3 lattice."""
    points = lattice_centers(resolution).reshape(-1, 3)
    return np.asarray(field_fn(points), dtype=np.float64).reshape((resolution,) * 3)


def marching_cubes_mesh(
    values: np.ndarray,
    iso: float = 0.5,
    origin_cells: Union[float, np.ndarray] = 0.5,
    resolution: Optional[int] = None,
) -> Mesh:
    """
    Iso-surface of a cell-center lattice in unit-cube coordinates.

    Lattice index i maps to (i + origin_cells) / resolution, where resolution
    defaults to the lattice size; a sub-block of a larger lattice passes its
    per-axis offset as origin_cells. Returns an empty mesh when the field
    never crosses `iso`.
    """
    resolution = resolution or values.shape[0]
    if values.min() >= iso or values.max() <= iso:
        return Mesh()
    try:
        verts, faces, _, _ = measure.marching_cubes(values, level=iso, method="lorensen")
    except (ValueError, RuntimeError) as e:
        logger.debug(f"Marching cubes found no surface: {e}")
        return Mesh()
    mesh = Mesh(vertices=(verts + origin_cells) / resolution, triangles=faces)
    keep = mesh.triangle_areas() > DEGENERATE_AREA
    if not keep.all():
        mesh = Mesh(vertices=mesh.vertices, triangles=mesh.triangles[keep])
    return mesh


def voxel_mesh(grid: VoxelGrid) -> Mesh:
    """Surface of an occupancy grid, padded so shapes touching the border close."""
    padded = np.pad(grid.occupancy.astype(np.float64), 1)
    res = grid.resolution
    mesh = marching_cubes_mesh(padded, 0.5, origin_cells=0.0)
    if mesh.is_empty():
        return mesh
    # undo the padding: padded index j is cell j - 1, centered at (j - 0.5) / res
    vertices = (mesh.vertices * (res + 2) - 0.5) / res
    return Mesh(vertices=vertices, triangles=mesh.triangles)


def part_field_fn(g: np.ndarray, model: PartAutoEncoder) -> FieldFn:
    return lambda points: decode_points(g, points, model)


def extract_part_mesh(
    g: np.ndarray,
    model: Optional[PartAutoEncoder],
    resolution: int = 64,
    iso: float = 0.5,
    field_fn: Optional[FieldFn] = None,
) -> Mesh:
    """
    Mesh a part's implicit field at `resolution`^3.

    `field_fn` replaces the network with any point field (used for analytic
    fields).
    """
    if resolution not in MESH_RESOLUTIONS:
        raise_invalid_input(f"Mesh resolution must be one of {MESH_RESOLUTIONS}")
    if not 0.0 < iso < 1.0:
        raise_invalid_input(f"iso must lie in (0, 1), got {iso}")
    fn = field_fn or part_field_fn(g, model)
    return marching_cubes_mesh(field_lattice(fn, resolution), iso)


def reconstruct_volume(
    g: np.ndarray, model: PartAutoEncoder, resolution: int, iso: float = 0.5
) -> VoxelGrid:
    """Threshold the decoded field at cell centers into an occupancy grid."""
    values = field_lattice(part_field_fn(g, model), resolution)
    return VoxelGrid((values > iso).astype(np.uint8))
