from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from config.settings import AppSettings
from commands.artifacts import RunArtifacts
from datakit.formats import iter_shape_dirs, read_pgm16, read_rgb, read_shape_record
from datakit.meshes import write_obj
from datakit.parts import place_part
from metrics.shape_metrics import chamfer, iou, sample_surface
from models.records import ShapeRecord
from models.reports import AssembledShape
from partae.mesher import voxel_mesh
from seq2seq.networks import decode_sequence, encode_sequence
from seq2seq.trainer import build_sequences
from tasks.assemble import assemble_shape
from tasks.completion import complete_shape, denoise_order
from tasks.generate import generate_shapes, interpolate
from tasks.svr import svr_infer
from utils.exceptions import raise_invalid_input
from utils.file_utils import validate_file_path, write_json_atomic
from utils.logging_config import get_logger
from utils.utils import derive_seed

logger = get_logger(__name__)

COMMANDS = ("generate", "interpolate", "complete", "denoise", "svr-infer", "export-mesh")


def write_shape_outputs(out_dir: Path, stem: str, shape: AssembledShape, extra=None) -> List[Path]:
    """OBJ with one `part_<k>` group per part plus a JSON sidecar."""
    meshes = shape.part_meshes or [shape.mesh]
    obj = write_obj(out_dir / f"{stem}.obj", meshes, [f"part_{k}" for k in range(len(meshes))])
    sidecar = write_json_atomic(out_dir / f"{stem}.json", {**shape.to_dict(), **(extra or {})})
    return [obj, sidecar]


class Inferencer:
    """Runs one inference command against the run's checkpoints."""

    def __init__(self, kwargs: Dict[str, Any], settings: AppSettings, out_dir: Path):
        self.kwargs = kwargs
        self.settings = settings
        self.command = kwargs.get("command")
        if self.command not in COMMANDS:
            raise_invalid_input(f"Unknown inference command: {self.command}")
        self.out_dir = Path(out_dir)
        self.seed = settings.processing.seed
        self.resolution = kwargs.get("resolution") or settings.eval.mesh_resolution
        self.iso = settings.partae.iso_level
        self.artifacts = RunArtifacts(settings)
        self.produced: List[Path] = []

    def _shape(self, shape_id: Optional[str]) -> ShapeRecord:
        if not shape_id:
            raise_invalid_input(f"{self.command} needs --shape")
        for directory in iter_shape_dirs(self.settings.directories.data_root):
            if directory.name == shape_id:
                return read_shape_record(directory, load_samples=False)
        raise_invalid_input(f"Shape {shape_id} not found under {self.settings.directories.data_root}")

    def _assemble(self, steps, partae) -> AssembledShape:
        return assemble_shape(steps, partae, self.resolution, self.iso)

    def _emit(self, stem: str, shape: AssembledShape, extra=None) -> None:
        self.produced += write_shape_outputs(self.out_dir, stem, shape, extra)

    def generate(self) -> Dict[str, Any]:
        self.artifacts.require("partae", "seq2seq", "gan")
        count = self.kwargs.get("count") or self.settings.eval.generate_count
        shapes = generate_shapes(
            self.artifacts.generator(), self.artifacts.partae(), self.artifacts.seq2seq(),
            count, derive_seed(self.seed, "generate"), self.resolution, self.iso,
        )
        for i, shape in enumerate(shapes):
            self._emit(f"shape_{i:04d}", shape)
        return {"count": count, "degenerate": sum(s.degenerate for s in shapes)}

    def interpolate(self) -> Dict[str, Any]:
        self.artifacts.require("partae", "seq2seq")
        partae, seq2seq = self.artifacts.partae(), self.artifacts.seq2seq()
        steps = self.kwargs.get("steps") or 5
        if steps < 2:
            raise_invalid_input(f"interpolate needs --steps >= 2, got {steps}")
        records = [self._shape(self.kwargs.get("shape_a")), self._shape(self.kwargs.get("shape_b"))]
        sequences = build_sequences(records, partae, seq2seq.k_max)
        h_a, h_b = (encode_sequence(seq, seq2seq) for _, seq in sequences)
        t_values = self.kwargs.get("t_values") or np.linspace(0.0, 1.0, steps).tolist()
        shapes = interpolate(h_a, h_b, t_values, seq2seq, partae, self.resolution, self.iso)
        for i, (t, shape) in enumerate(zip(t_values, shapes)):
            self._emit(f"interp_{i:02d}", shape, {"t": t})
        return {"steps": len(t_values)}

    def _input_steps(self, stage: str):
        self.artifacts.require("partae", stage)
        partae, model = self.artifacts.partae(), self.artifacts.seq2seq(stage)
        record = self._shape(self.kwargs.get("shape"))
        (_, steps), = build_sequences([record], partae, model.k_max)
        return partae, model, steps

    def complete(self) -> Dict[str, Any]:
        partae, model, steps = self._input_steps("completion")
        drop = self.kwargs.get("drop")
        drop = [len(steps) - 1] if drop is None else drop
        if any(not 0 <= i < len(steps) for i in drop):
            raise_invalid_input(f"Part indices {drop} out of range for {len(steps)} parts")
        partial = [s for i, s in enumerate(steps) if i not in set(drop)]
        decoded = complete_shape(partial, model)
        self._emit("completed", self._assemble(decoded, partae), {"input_count": len(partial)})
        return {"input_count": len(partial), "part_count": len(decoded)}

    def denoise(self) -> Dict[str, Any]:
        partae, model, steps = self._input_steps("denoise")
        rng = np.random.default_rng(derive_seed(self.seed, "denoise", self.kwargs.get("shape")))
        order = rng.permutation(len(steps)).tolist()
        decoded = denoise_order([steps[i] for i in order], model)
        self._emit("denoised", self._assemble(decoded, partae), {"input_order": order})
        return {"part_count": len(decoded)}

    def svr_infer(self) -> Dict[str, Any]:
        branch = self.kwargs.get("branch") or self.settings.svr.branch
        self.artifacts.require("partae", "seq2seq", f"svr-{branch}")
        image_path = self.kwargs.get("image")
        if not image_path:
            raise_invalid_input("svr-infer needs --image")
        validate_file_path(Path(image_path), "Input image")
        image = read_pgm16(image_path) if branch == "depth" else read_rgb(image_path)
        _, decoded = svr_infer(image, self.artifacts.image_encoder(branch), self.artifacts.seq2seq(), branch)
        self._emit(Path(image_path).stem, self._assemble(decoded, self.artifacts.partae()), {"branch": branch})
        return {"part_count": len(decoded)}

    def _reconstruction_scores(self, record: ShapeRecord, shape: AssembledShape) -> Dict[str, Any]:
        """IoU at the dataset resolution and Chamfer distance against the ground truth."""
        scores: Dict[str, Any] = {}
        if shape.composite_grid.resolution == record.shape_voxels.resolution:
            scores["iou"] = iou(shape.composite_grid, record.shape_voxels)
        if not shape.degenerate:
            n, seed = self.settings.eval.cd_points, derive_seed(self.seed, "cd", record.shape_id)
            truth = sample_surface(voxel_mesh(record.shape_voxels), n, seed)
            scores["chamfer"] = chamfer(sample_surface(shape.mesh, n, seed), truth)
        return scores

    def export_mesh(self) -> Dict[str, Any]:
        """Ground-truth parts of a dataset shape, or their encode-decode reconstruction."""
        record = self._shape(self.kwargs.get("shape"))
        if self.kwargs.get("reconstruct"):
            self.artifacts.require("partae", "seq2seq")
            partae, seq2seq = self.artifacts.partae(), self.artifacts.seq2seq()
            (_, steps), = build_sequences([record], partae, seq2seq.k_max)
            decoded = decode_sequence(encode_sequence(steps, seq2seq), seq2seq)
            shape = self._assemble(decoded, partae)
            scores = self._reconstruction_scores(record, shape)
            self._emit(record.shape_id, shape, scores)
            return {"part_count": len(decoded), "reconstructed": True, **scores}

        res = record.shape_voxels.resolution
        meshes = [voxel_mesh(place_part(p.volume64, p.box, res)) for p in record.parts]
        self.produced.append(
            write_obj(self.out_dir / f"{record.shape_id}.obj", meshes, [f"part_{k}" for k in range(len(meshes))])
        )
        self.produced.append(
            write_json_atomic(self.out_dir / f"{record.shape_id}.json", record.to_dict())
        )
        return {"part_count": record.part_count, "reconstructed": False}

    def infer(self) -> Dict[str, Any]:
        handler = {
            "generate": self.generate,
            "interpolate": self.interpolate,
            "complete": self.complete,
            "denoise": self.denoise,
            "svr-infer": self.svr_infer,
            "export-mesh": self.export_mesh,
        }[self.command]
        metrics = handler()
        logger.info(f"{self.command}: wrote {len(self.produced)} files to {self.out_dir}")
        return metrics
