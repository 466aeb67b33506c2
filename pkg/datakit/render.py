import math
from typing import Optional

import numpy as np

from models.geometry import VoxelGrid
from models.records import DepthImage
from utils.exceptions import raise_invalid_input

VIEW_COUNT = 5
AZIMUTH_STEP = 360.0 / VIEW_COUNT
DEFAULT_ELEVATION = 30.0
DEFAULT_EXTENT = math.sqrt(3.0)
IMAGE_RESOLUTION = 64
# rays start this far from the cube center, enough to clear every corner
RAY_RADIUS = math.sqrt(3.0) / 2.0

_UP = np.array([0.0, 1.0, 0.0])
_PALETTE = np.array(
    [
        [200, 80, 80],
        [80, 160, 90],
        [80, 110, 200],
        [210, 170, 60],
        [150, 90, 190],
        [70, 180, 180],
        [220, 120, 40],
        [120, 120, 120],
        [180, 60, 140],
        [100, 200, 100],
    ],
    dtype=np.float64,
)


def view_frame(view_index: int, elevation: float = DEFAULT_ELEVATION):
    """
    Orthographic camera frame for one of the five fixed views.

    Azimuths step by 72 degrees around the vertical (y) axis.

    Returns:
        (forward, right, up) unit vectors; forward points toward the cube
    """
    if not 0 <= view_index < VIEW_COUNT:
        raise_invalid_input(f"view_index must be in 0..{VIEW_COUNT - 1}, got {view_index}")
    az = math.radians(AZIMUTH_STEP * view_index)
    el = math.radians(elevation)
    eye = np.array([math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)])
    forward = -eye
    right = np.cross(forward, _UP)
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    return forward, right, up


def _march(
    grid: VoxelGrid,
    view_index: int,
    image_resolution: int,
    elevation: float,
    extent: float,
):
    """
    Step every pixel ray through the grid at half-cell spacing.

    Returns:
        (hit, step index of first hit, sample cells (H*W, K, 3), step length, forward)
    """
    forward, right, up = view_frame(view_index, elevation)
    res = grid.resolution
    step = 0.5 / res
    n_steps = int(math.ceil(2 * RAY_RADIUS / step))

    offsets = ((np.arange(image_resolution) + 0.5) / image_resolution - 0.5) * extent
    cols, rows = np.meshgrid(offsets, -offsets, indexing="xy")
    origins = (
        0.5
        + cols.reshape(-1, 1) * right
        + rows.reshape(-1, 1) * up
        - RAY_RADIUS * forward
    )
    ts = np.arange(n_steps) * step
    samples = origins[:, None, :] + ts[None, :, None] * forward  # (P, K, 3)
    cells = np.floor(samples * res).astype(np.int64)
    inside = np.all((cells >= 0) & (cells < res), axis=-1)
    clipped = np.clip(cells, 0, res - 1)
    occupied = inside & (
        grid.occupancy[clipped[..., 0], clipped[..., 1], clipped[..., 2]] > 0
    )
    hit = occupied.any(axis=1)
    first = occupied.argmax(axis=1)
    return hit, first, cells, step, forward


def render_depth(
    grid: VoxelGrid,
    view_index: int,
    image_resolution: int = IMAGE_RESOLUTION,
    elevation: float = DEFAULT_ELEVATION,
    extent: float = DEFAULT_EXTENT,
) -> DepthImage:
    """
    Orthographic depth map of a shape grid from one of five fixed views.

    Depth is the first-hit ray parameter divided by the ray length, so it
    lies in [0, 1); rays that miss record 1.

    Args:
        grid: Shape occupancy
        view_index: 0..4
        image_resolution: Pixels per side
        elevation: Camera elevation in degrees
        extent: Side of the square image window in shape units
    """
    hit, first, _, step, _ = _march(grid, view_index, image_resolution, elevation, extent)
    depth = np.ones(len(hit), dtype=np.float64)
    depth[hit] = first[hit] * step / (2 * RAY_RADIUS)
    return DepthImage(
        values=depth.reshape(image_resolution, image_resolution).astype(np.float32),
        view_index=view_index,
    )


def render_rgb(
    grid: VoxelGrid,
    view_index: int,
    labels: Optional[np.ndarray] = None,
    image_resolution: int = IMAGE_RESOLUTION,
    elevation: float = DEFAULT_ELEVATION,
    extent: float = DEFAULT_EXTENT,
) -> np.ndarray:
    """
    Flat-shaded orthographic RGB render on a white background.

    Each hit is shaded by the face of the voxel the ray entered through.
    With a label grid (part index + 1, 0 for empty) parts get palette colors.

    Returns:
        (H, W, 3) uint8 image
    """
    hit, first, cells, _, forward = _march(
        grid, view_index, image_resolution, elevation, extent
    )
    rows = np.arange(len(hit))
    hit_cells = cells[rows, first]
    prev_cells = cells[rows, np.maximum(first - 1, 0)]
    crossed = np.argmax(hit_cells != prev_cells, axis=1)
    normals = np.zeros((len(hit), 3))
    normals[rows, crossed] = 1.0
    shade = 0.35 + 0.65 * np.abs(normals @ -forward)

    base = np.full((len(hit), 3), 190.0)
    if labels is not None:
        c = np.clip(hit_cells, 0, grid.resolution - 1)
        part = labels[c[:, 0], c[:, 1], c[:, 2]].astype(int)
        colored = part > 0
        base[colored] = _PALETTE[(part[colored] - 1) % len(_PALETTE)]

    image = np.full((len(hit), 3), 255.0)
    image[hit] = base[hit] * shade[hit, None]
    return image.reshape(image_resolution, image_resolution, 3).round().astype(np.uint8)
