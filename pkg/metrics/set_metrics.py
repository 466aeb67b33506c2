"""
Set-level generation metrics.

Coverage and MMD are defined on a (|gen|, |ref|) distance matrix; the
distance is pluggable (Chamfer on point clouds, 1 - IoU on voxel grids).
"""

from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence

import numpy as np
from scipy.stats import entropy

from models.geometry import BoundingBox, PointCloud, VoxelGrid
from models.reports import SetEvalReport
from metrics.shape_metrics import chamfer, iou
from utils.exceptions import raise_invalid_input
from utils.file_utils import write_json_atomic, write_rows_csv
from utils.logging_config import get_logger

logger = get_logger(__name__)

Distance = Callable[[Any, Any], float]

JSD_RESOLUTION = 28
LN2 = float(np.log(2.0))


def one_minus_iou(a: VoxelGrid, b: VoxelGrid) -> float:
    return 1.0 - iou(a, b)


def chamfer_distance_kind(a: PointCloud, b: PointCloud) -> float:
    return chamfer(a, b)


DISTANCES = {"chamfer": chamfer_distance_kind, "one-minus-iou": one_minus_iou}


def _require_sets(gen: Sequence, ref: Sequence) -> None:
    if len(gen) == 0 or len(ref) == 0:
        raise_invalid_input(f"Set metrics need non-empty sets, got {len(gen)} and {len(ref)}")


def distance_matrix(gen: Sequence, ref: Sequence, dist: Distance) -> np.ndarray:
    """(|gen|, |ref|) matrix with entry [i, j] = dist(gen[i], ref[j])."""
    _require_sets(gen, ref)
    return np.array([[dist(g, r) for r in ref] for g in gen], dtype=np.float64)


def coverage_from_matrix(matrix: np.ndarray) -> float:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise_invalid_input(f"Distance matrix must be non-empty 2-D, got {matrix.shape}")
    # argmin breaks ties by the lowest reference index
    matched = np.unique(matrix.argmin(axis=1))
    return len(matched) / matrix.shape[1]


def mmd_from_matrix(matrix: np.ndarray) -> float:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise_invalid_input(f"Distance matrix must be non-empty 2-D, got {matrix.shape}")
    return float(matrix.min(axis=0).mean())


def coverage(gen: Sequence, ref: Sequence, dist: Distance) -> float:
    """Fraction of reference shapes that are the nearest match of some generated shape."""
    return coverage_from_matrix(distance_matrix(gen, ref, dist))


def mmd(gen: Sequence, ref: Sequence, dist: Distance) -> float:
    """Mean over reference shapes of the distance to the closest generated shape."""
    return mmd_from_matrix(distance_matrix(gen, ref, dist))


def occupancy_histogram(clouds: Sequence[PointCloud], grid_resolution: int) -> np.ndarray:
    """Per-voxel point counts over [0, 1]^3 pooled across a set of clouds."""
    points = np.clip(np.concatenate([c.points for c in clouds]), 0.0, 1.0)
    edges = [np.linspace(0.0, 1.0, grid_resolution + 1)] * 3
    counts, _ = np.histogramdd(points, bins=edges)
    return counts


def jsd(
    gen_clouds: Sequence[PointCloud],
    ref_clouds: Sequence[PointCloud],
    grid_resolution: int = JSD_RESOLUTION,
) -> float:
    """Jensen-Shannon divergence (natural log) between pooled occupancy histograms."""
    _require_sets(gen_clouds, ref_clouds)
    if grid_resolution < 1:
        raise_invalid_input(f"grid_resolution must be >= 1, got {grid_resolution}")
    p = occupancy_histogram(gen_clouds, grid_resolution).ravel()
    q = occupancy_histogram(ref_clouds, grid_resolution).ravel()
    p, q = p / p.sum(), q / q.sum()
    m = 0.5 * (p + q)
    value = 0.5 * entropy(p, m) + 0.5 * entropy(q, m)
    return float(np.clip(value, 0.0, LN2))


def fill_boxes(boxes: Sequence[BoundingBox], resolution: int) -> VoxelGrid:
    """Union of solidly filled boxes; a cell is inside when its center is."""
    occupancy = np.zeros((resolution,) * 3, dtype=np.uint8)
    for box in boxes:
        lo, hi = box.cell_range(resolution)
        if np.any(hi < lo):
            continue
        occupancy[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1] = 1
    return VoxelGrid(occupancy)


def box_fill_iou(
    boxes_a: Sequence[BoundingBox], boxes_b: Sequence[BoundingBox], resolution: int = 64
) -> float:
    if not boxes_a or not boxes_b:
        raise_invalid_input("Box-fill IoU needs non-empty box lists")
    return iou(fill_boxes(boxes_a, resolution), fill_boxes(boxes_b, resolution))


def evaluate_sets(
    gen_clouds: Sequence[PointCloud],
    ref_clouds: Sequence[PointCloud],
    distance_kind: str = "chamfer",
    gen_grids: Optional[Sequence[VoxelGrid]] = None,
    ref_grids: Optional[Sequence[VoxelGrid]] = None,
    jsd_resolution: int = JSD_RESOLUTION,
    seed: int = 0,
) -> SetEvalReport:
    """
    COV and MMD under the chosen distance plus point-cloud JSD.

    The one-minus-iou kind compares voxel grids, so both grid lists are
    required for it.
    """
    _require_sets(gen_clouds, ref_clouds)
    if distance_kind == "chamfer":
        gen, ref = gen_clouds, ref_clouds
    elif distance_kind == "one-minus-iou":
        if not gen_grids or not ref_grids:
            raise_invalid_input("one-minus-iou evaluation needs voxel grids for both sets")
        gen, ref = gen_grids, ref_grids
    else:
        raise_invalid_input(f"Unknown distance kind: {distance_kind}")

    logger.info(f"[*] Evaluating {len(gen)} vs {len(ref)} shapes with {distance_kind} distance...")
    matrix = distance_matrix(gen, ref, DISTANCES[distance_kind])
    return SetEvalReport(
        cov=coverage_from_matrix(matrix),
        mmd=mmd_from_matrix(matrix),
        jsd=jsd(gen_clouds, ref_clouds, jsd_resolution),
        distance_kind=distance_kind,
        gen_size=len(gen),
        ref_size=len(ref),
        seed=seed,
    )


def write_reports(out_dir: Path, reports: List[SetEvalReport], stem: str = "eval_report") -> List[Path]:
    """JSON with every report plus one flat CSV row per report."""
    out_dir = Path(out_dir)
    json_path = write_json_atomic(out_dir / f"{stem}.json", [r.to_dict() for r in reports])
    csv_path = write_rows_csv(out_dir / f"{stem}.csv", [r.to_row() for r in reports])
    return [json_path, csv_path]
