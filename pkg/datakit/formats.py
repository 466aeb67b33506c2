"""
On-disk dataset layout.

    <root>/<category>/<split>/<shape_id>/
        shape.vox                 PQVX voxel grid
        part_<k>.vox              normalized 64^3 part volume
        part_<k>.box              6 little-endian float64: x y z l m n
        samples_<k>_<res>.bin     uint32 count, count x (3 float32 + 1 float32)
        view_<i>.pgm              16-bit depth, value * 65535
        rgb_<i>.png               optional RGB render
        manifest.json             part count, category, split, order, digest

PQVX: b"PQVX" | uint32 resolution | bit-packed occupancy, x fastest.
"""

import struct
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import numpy as np
from PIL import Image

from models.geometry import BoundingBox, VoxelGrid
from models.records import DepthImage, FieldSamples, PartRecord, ShapeRecord
from utils.exceptions import raise_invalid_input
from utils.file_utils import read_json, write_json_atomic
from utils.logging_config import get_logger

logger = get_logger(__name__)

VOX_MAGIC = b"PQVX"
MANIFEST = "manifest.json"


def write_vox(path: Path, grid: VoxelGrid) -> Path:
    flat = grid.occupancy.transpose(2, 1, 0).ravel()
    payload = np.packbits(flat, bitorder="little").tobytes()
    Path(path).write_bytes(VOX_MAGIC + struct.pack("<I", grid.resolution) + payload)
    return Path(path)


def read_vox(path: Path) -> VoxelGrid:
    data = Path(path).read_bytes()
    if data[:4] != VOX_MAGIC or len(data) < 8:
        raise_invalid_input(f"Not a PQVX voxel file: {path}")
    (res,) = struct.unpack_from("<I", data, 4)
    n = res**3
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=8), bitorder="little")
    if len(bits) < n:
        raise_invalid_input(f"Truncated voxel payload in {path}")
    occ = bits[:n].reshape(res, res, res).transpose(2, 1, 0)
    return VoxelGrid(np.ascontiguousarray(occ))


def write_box(path: Path, box: BoundingBox) -> Path:
    Path(path).write_bytes(box.to_vector().astype("<f8").tobytes())
    return Path(path)


def read_box(path: Path) -> BoundingBox:
    data = Path(path).read_bytes()
    if len(data) != 48:
        raise_invalid_input(f"Box file must hold 6 float64 values: {path}")
    return BoundingBox.from_vector(np.frombuffer(data, dtype="<f8"))


def write_samples(path: Path, samples: FieldSamples) -> Path:
    table = np.concatenate([samples.points, samples.values[:, None]], axis=1)
    Path(path).write_bytes(
        struct.pack("<I", len(table)) + table.astype("<f4").tobytes()
    )
    return Path(path)


def read_samples(path: Path, resolution_tag: int) -> FieldSamples:
    data = Path(path).read_bytes()
    (count,) = struct.unpack_from("<I", data, 0)
    table = np.frombuffer(data, dtype="<f4", count=count * 4, offset=4).reshape(count, 4)
    return FieldSamples(
        points=table[:, :3], values=table[:, 3], resolution_tag=resolution_tag
    )


def write_pgm16(path: Path, values: np.ndarray) -> Path:
    """Binary 16-bit PGM, big-endian samples as the format requires."""
    h, w = values.shape
    scaled = np.rint(np.clip(values, 0.0, 1.0) * 65535).astype(">u2")
    Path(path).write_bytes(f"P5\n{w} {h}\n65535\n".encode("ascii") + scaled.tobytes())
    return Path(path)


def read_pgm16(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: List[bytes] = []
    offset = 0
    while len(tokens) < 4:
        while offset < len(data) and data[offset : offset + 1].isspace():
            offset += 1
        if data[offset : offset + 1] == b"#":
            while offset < len(data) and data[offset : offset + 1] != b"\n":
                offset += 1
            continue
        start = offset
        while offset < len(data) and not data[offset : offset + 1].isspace():
            offset += 1
        if start == offset:
            raise_invalid_input(f"Malformed PGM header: {path}")
        tokens.append(data[start:offset])
    offset += 1
    magic, w, h, maxval = tokens
    if magic != b"P5":
        raise_invalid_input(f"Only binary PGM (P5) is supported: {path}")
    w, h, maxval = int(w), int(h), int(maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    count = w * h
    if len(data) - offset < count * np.dtype(dtype).itemsize:
        raise_invalid_input(f"Truncated PGM payload: {path}")
    pixels = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return (pixels.reshape(h, w).astype(np.float64) / maxval).astype(np.float32)


def write_rgb(path: Path, image: np.ndarray) -> Path:
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path)
    return Path(path)


def read_rgb(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as e:
        raise_invalid_input(f"Unreadable RGB image {path}: {e}")


def shape_dir(root: Path, record: ShapeRecord) -> Path:
    return Path(root) / record.category / record.split / record.shape_id


def write_shape_record(root: Path, record: ShapeRecord) -> Path:
    """Write every file of one shape; the manifest goes last."""
    out = shape_dir(root, record)
    out.mkdir(parents=True, exist_ok=True)
    write_vox(out / "shape.vox", record.shape_voxels)
    for k, part in enumerate(record.parts):
        write_vox(out / f"part_{k}.vox", part.volume64)
        write_box(out / f"part_{k}.box", part.box)
        for tag, samples in part.samples.items():
            write_samples(out / f"samples_{k}_{tag}.bin", samples)
    for view in record.depth_views:
        write_pgm16(out / f"view_{view.view_index}.pgm", view.values)
    for i, image in enumerate(record.rgb_views):
        write_rgb(out / f"rgb_{i}.png", image)
    write_json_atomic(out / MANIFEST, record.to_dict())
    return out


def read_shape_record(directory: Path, load_samples: bool = True) -> ShapeRecord:
    directory = Path(directory)
    manifest_path = directory / MANIFEST
    if not manifest_path.exists():
        raise_invalid_input(f"Missing manifest: {manifest_path}")
    manifest = read_json(manifest_path)

    parts = []
    for k in range(manifest["part_count"]):
        samples: Dict[int, FieldSamples] = {}
        if load_samples:
            for tag in manifest.get("resolution_tags", []):
                path = directory / f"samples_{k}_{tag}.bin"
                if path.exists():
                    samples[int(tag)] = read_samples(path, int(tag))
        parts.append(
            PartRecord(
                volume64=read_vox(directory / f"part_{k}.vox"),
                box=read_box(directory / f"part_{k}.box"),
                samples=samples,
            )
        )

    depth_views = []
    for i in range(5):
        path = directory / f"view_{i}.pgm"
        if path.exists():
            depth_views.append(DepthImage(values=read_pgm16(path), view_index=i))
    rgb_views = [
        read_rgb(directory / f"rgb_{i}.png")
        for i in range(5)
        if (directory / f"rgb_{i}.png").exists()
    ]

    return ShapeRecord(
        shape_id=manifest["shape_id"],
        category=manifest["category"],
        split=manifest["split"],
        parts=parts,
        shape_voxels=read_vox(directory / "shape.vox"),
        depth_views=depth_views,
        rgb_views=rgb_views,
    )


def existing_digest(directory: Path) -> Optional[str]:
    path = Path(directory) / MANIFEST
    if not path.exists():
        return None
    return read_json(path).get("digest")


def iter_shape_dirs(
    root: Path, categories: Optional[List[str]] = None, split: Optional[str] = None
) -> Iterator[Path]:
    root = Path(root)
    for category_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if categories and category_dir.name not in categories:
            continue
        for split_dir in sorted(p for p in category_dir.iterdir() if p.is_dir()):
            if split and split_dir.name != split:
                continue
            for shape in sorted(p for p in split_dir.iterdir() if p.is_dir()):
                if (shape / MANIFEST).exists():
                    yield shape


def load_dataset(
    root: Path,
    categories: Optional[List[str]] = None,
    split: Optional[str] = None,
    load_samples: bool = True,
) -> List[ShapeRecord]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"Dataset root not found: {root}")
    records = [
        read_shape_record(d, load_samples=load_samples)
        for d in iter_shape_dirs(root, categories, split)
    ]
    logger.info(f"[*] Loaded {len(records)} shapes from {root}")
    return records
