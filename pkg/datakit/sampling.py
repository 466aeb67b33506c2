import numpy as np
from scipy import ndimage

from config.settings import SAMPLE_COUNTS
from models.geometry import VoxelGrid
from models.records import FieldSamples
from utils.exceptions import raise_invalid_input

BAND_WIDTH = 2
NEAR_FRACTION = 0.8
# keeps float32 points strictly inside their cell
JITTER_MARGIN = 1e-3


def boundary_band(occupancy: np.ndarray, width: int = BAND_WIDTH) -> np.ndarray:
    """Cells within `width` cells of the occupied/empty boundary, on either side."""
    occ = occupancy.astype(bool)
    dilated = ndimage.binary_dilation(occ, iterations=width)
    eroded = ndimage.binary_erosion(occ, iterations=width)
    return dilated & ~eroded


def _pick(rng: np.random.Generator, cells: np.ndarray, count: int) -> np.ndarray:
    return cells[rng.integers(0, len(cells), size=count)]


def sample_field_points(volume: VoxelGrid, resolution_tag: int, seed: int) -> FieldSamples:
    """
    Draw the supervision points for one part volume.

    80% of the points come from the two-cell band around the surface, split
    evenly between occupied and empty band cells. The other 20% are uniform
    over the whole cube. Every point is jittered inside its cell and takes
    that cell's occupancy, so the inside fraction always lies in [0.4, 0.6].

    Args:
        volume: Part volume at the tag resolution
        resolution_tag: 16, 32 or 64
        seed: Sampling seed

    Returns:
        FieldSamples with the scheduled point count for the tag
    """
    if resolution_tag not in SAMPLE_COUNTS:
        raise_invalid_input(f"Unsupported resolution tag: {resolution_tag}")
    if volume.resolution != resolution_tag:
        raise_invalid_input(
            f"Volume resolution {volume.resolution} does not match tag {resolution_tag}"
        )
    if volume.is_empty() or volume.is_full():
        raise_invalid_input("Volume has no boundary to sample (empty or full)")

    rng = np.random.default_rng(seed)
    occ = volume.occupancy.astype(bool)
    band = boundary_band(occ)
    total = SAMPLE_COUNTS[resolution_tag]
    near = int(round(total * NEAR_FRACTION))
    near_inside = near // 2

    cells = np.concatenate(
        [
            _pick(rng, np.argwhere(band & occ), near_inside),
            _pick(rng, np.argwhere(band & ~occ), near - near_inside),
            rng.integers(0, resolution_tag, size=(total - near, 3)),
        ],
        axis=0,
    )
    values = occ[cells[:, 0], cells[:, 1], cells[:, 2]].astype(np.float64)

    jitter = JITTER_MARGIN + (1.0 - 2 * JITTER_MARGIN) * rng.random((total, 3))
    points = (cells + jitter) / resolution_tag

    order = rng.permutation(total)
    return FieldSamples(
        points=points[order], values=values[order], resolution_tag=resolution_tag
    )
