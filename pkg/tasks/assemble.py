from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from models.geometry import BoundingBox, Mesh, VoxelGrid, lattice_centers
from models.reports import AssembledShape
from models.sequences import DecodedStep
from partae.mesher import MESH_RESOLUTIONS, marching_cubes_mesh
from partae.networks import PartAutoEncoder, decode_points
from utils.exceptions import raise_invalid_input
from utils.logging_config import get_logger

logger = get_logger(__name__)

# (g, points in the part's local unit cube) -> field values
PartField = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _cell_slices(box: BoundingBox, resolution: int) -> Optional[Tuple[slice, slice, slice]]:
    lo, hi = box.cell_range(resolution)
    if np.any(hi < lo):
        return None
    return tuple(slice(a, b + 1) for a, b in zip(lo, hi))


def field_block(
    g: np.ndarray, box: BoundingBox, resolution: int, field: PartField
) -> Optional[Tuple[Tuple[slice, slice, slice], np.ndarray]]:
    """
    One part's field over the lattice cells its box covers.

    Cells are mapped back into the part's local frame by the inverse box
    transform (x - lo) / size. Returns the cell slices and the float32 block,
    or None when the box covers no cell center.
    """
    cells = _cell_slices(box, resolution)
    if cells is None:
        return None
    centers = lattice_centers(resolution)[cells]
    local = (centers.reshape(-1, 3) - box.lo) / box.size
    block = np.asarray(field(g, local), dtype=np.float32).reshape(centers.shape[:3])
    return cells, block


def place_field(
    g: np.ndarray, box: BoundingBox, resolution: int, field: PartField
) -> np.ndarray:
    """One part's field on the full global lattice, zero outside its box."""
    values = np.zeros((resolution,) * 3, dtype=np.float32)
    placed = field_block(g, box, resolution, field)
    if placed is not None:
        cells, block = placed
        values[cells] = block
    return values


def block_mesh(cells: Tuple[slice, slice, slice], block: np.ndarray, resolution: int, iso: float):
    """Mesh a placed block, padded with the zero field around it inside the lattice."""
    before = [min(1, s.start) for s in cells]
    after = [min(1, resolution - s.stop) for s in cells]
    padded = np.pad(block, list(zip(before, after)))
    origin = np.array([s.start - b for s, b in zip(cells, before)], dtype=np.float64) + 0.5
    return marching_cubes_mesh(padded, iso, origin_cells=origin, resolution=resolution)


def network_field(model: PartAutoEncoder) -> PartField:
    return lambda g, points: decode_points(g, points, model)


def assemble_shape(
    steps: Sequence[DecodedStep],
    model: Optional[PartAutoEncoder],
    resolution: int = 64,
    iso: float = 0.5,
    field: Optional[PartField] = None,
    part_meshes: bool = True,
) -> AssembledShape:
    """
    Place decoded parts into one composite field and mesh it.

    Boxes are clamped to the unit cube first. The composite value of a cell
    is the maximum over the placed part fields. Each part is evaluated only
    on the cells its box covers and written into one float32 composite.

    Args:
        steps: Decoded (g, b, s) steps, at least one
        model: Part autoencoder whose decoder evaluates g; ignored with `field`
        resolution: Global lattice resolution
        iso: Iso-level for occupancy and marching cubes
        field: Replacement part field, mainly for analytic fixtures
        part_meshes: Also mesh each placed part on its own
    """
    if not steps:
        raise_invalid_input("Cannot assemble a shape from zero steps")
    if resolution not in MESH_RESOLUTIONS:
        raise_invalid_input(f"Assembly resolution must be one of {MESH_RESOLUTIONS}")
    if field is None:
        if model is None:
            raise_invalid_input("assemble_shape needs a part model or a field")
        field = network_field(model)

    boxes: List[BoundingBox] = [step.box.clamped(resolution) for step in steps]
    composite = np.zeros((resolution,) * 3, dtype=np.float32)
    meshes = []
    for step, box in zip(steps, boxes):
        placed = field_block(step.g, box, resolution, field)
        if placed is None:
            if part_meshes:
                meshes.append(Mesh())
            continue
        cells, block = placed
        np.maximum(composite[cells], block, out=composite[cells])
        if part_meshes:
            meshes.append(block_mesh(cells, block, resolution, iso))

    shape = AssembledShape(
        parts=list(steps),
        boxes=boxes,
        mesh=marching_cubes_mesh(composite, iso),
        composite_grid=VoxelGrid((composite > iso).astype(np.uint8)),
        composite_field=composite,
        part_meshes=meshes,
    )
    if shape.degenerate:
        logger.warning(f"Assembled shape with {len(steps)} parts has an empty surface")
    return shape
