from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import numpy as np

from models.geometry import BoundingBox, Mesh, VoxelGrid
from models.sequences import DecodedStep
from utils.exceptions import raise_invalid_input

DISTANCE_KINDS = ("chamfer", "one-minus-iou")


@dataclass(eq=False)
class AssembledShape:
    """Decoded parts placed into one composite field and meshed."""

    parts: List[DecodedStep]
    boxes: List[BoundingBox]
    mesh: Mesh
    composite_grid: VoxelGrid
    composite_field: Optional[np.ndarray] = None
    part_meshes: List[Mesh] = field(default_factory=list)

    def __post_init__(self):
        if not self.parts:
            raise_invalid_input("Assembled shape needs at least one part")

    @property
    def part_count(self) -> int:
        return len(self.parts)

    @property
    def degenerate(self) -> bool:
        return self.mesh.is_empty()

    def to_dict(self):
        return {
            "part_count": self.part_count,
            "boxes": [box.to_dict() for box in self.boxes],
            "stop_probabilities": [step.s for step in self.parts],
            "degenerate": self.degenerate,
            "occupied_cells": self.composite_grid.count,
            "resolution": self.composite_grid.resolution,
        }


@dataclass
class SetEvalReport:
    cov: float
    mmd: float
    jsd: float
    distance_kind: str
    gen_size: int = 0
    ref_size: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.distance_kind not in DISTANCE_KINDS:
            raise_invalid_input(f"Unknown distance kind: {self.distance_kind}")
        if not 0.0 <= self.cov <= 1.0:
            raise_invalid_input(f"Coverage out of range: {self.cov}")
        if self.mmd < 0.0:
            raise_invalid_input(f"MMD must be non-negative: {self.mmd}")
        if not 0.0 <= self.jsd <= np.log(2.0) + 1e-12:
            raise_invalid_input(f"JSD out of range: {self.jsd}")

    def to_dict(self):
        return {
            "cov": self.cov,
            "mmd": self.mmd,
            "jsd": self.jsd,
            "distance_kind": self.distance_kind,
            "gen_size": self.gen_size,
            "ref_size": self.ref_size,
            "seed": self.seed,
        }

    def to_row(self) -> Dict[str, Any]:
        # MMD x 1e3 is presentation only
        row = self.to_dict()
        row["mmd_x1e3"] = self.mmd * 1e3
        return row


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any]
    version: str
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None
    status: str = "running"
    artifacts: List[str] = field(default_factory=list)
    metrics: Dict[str, Any] = field(default_factory=dict)

    def add_artifact(self, path) -> None:
        path = str(path)
        if path not in self.artifacts:
            self.artifacts.append(path)

    def finish(self, status: str = "ok") -> None:
        self.status = status
        self.finished_at = _now()

    def to_dict(self):
        return {
            "command": self.command,
            "config": self.config,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "status": self.status,
            "artifacts": sorted(self.artifacts),
            "metrics": self.metrics,
        }
