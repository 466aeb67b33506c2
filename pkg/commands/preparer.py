from pathlib import Path
from typing import Any, Dict, List

from config.settings import AppSettings
from datakit.formats import existing_digest, shape_dir, write_shape_record
from datakit.meshes import ingest_meshes
from datakit.partnet import ingest_partnet
from datakit.synth import SynthSpec, order_parts, synth_corpus
from models.records import ShapeRecord
from utils.exceptions import raise_invalid_input
from utils.logging_config import get_logger
from utils.utils import derive_seed

logger = get_logger(__name__)

SOURCES = ("synthetic", "partnet", "meshes")


class Preparer:
    """
    Builds the dataset layout under the data root.

    Shapes whose manifest digest already matches are left alone unless
    `force` is set.
    """

    def __init__(self, kwargs: Dict[str, Any], settings: AppSettings):
        self.settings = settings
        data = settings.data
        self.source = kwargs.get("source") or data.source
        self.source_path = kwargs.get("source_path") or data.source_path
        self.categories = kwargs.get("categories") or data.categories
        self.count = kwargs.get("count") or data.synth_count
        self.force = bool(kwargs.get("force")) or settings.processing.force
        self.seed = derive_seed(settings.processing.seed, "prepare")
        self.data_root = Path(settings.directories.data_root)

    def _records(self) -> List[ShapeRecord]:
        data = self.settings.data
        common = {
            "resolution_tags": tuple(data.resolution_tags),
            "depth_views": data.depth_views > 0,
            "rgb_views": self.settings.svr.branch == "rgb",
        }
        if self.source == "synthetic":
            spec = SynthSpec(
                categories=self.categories,
                count=self.count,
                seed=self.seed,
                k_max=data.k_max,
                train_fraction=data.train_fraction,
                val_fraction=data.val_fraction,
                **common,
            )
            return synth_corpus(spec)

        if self.source not in SOURCES:
            raise_invalid_input(f"Unknown data source: {self.source}")
        if self.source_path is None or not Path(self.source_path).is_dir():
            raise_invalid_input(f"Source path does not exist: {self.source_path}")
        ingest = ingest_partnet if self.source == "partnet" else ingest_meshes
        records = []
        for category in self.categories:
            records.extend(
                ingest(Path(self.source_path), category, data.k_max, seed=self.seed, **common)
            )
        return records

    def prepare(self) -> Dict[str, Any]:
        logger.info(f"[*] Preparing {self.source} data into {self.data_root}...")
        records = [order_parts(r, self.settings.data.part_order) for r in self._records()]
        if not records:
            raise_invalid_input(f"No shapes produced from source {self.source}")

        written, skipped = [], []
        for record in records:
            directory = shape_dir(self.data_root, record)
            if not self.force and existing_digest(directory) == record.digest():
                skipped.append(record.shape_id)
                continue
            write_shape_record(self.data_root, record)
            written.append(record.shape_id)

        logger.info(f"Wrote {len(written)} shapes, {len(skipped)} already up to date")
        return {
            "source": self.source,
            "shapes": len(records),
            "written": len(written),
            "skipped": len(skipped),
            "data_root": str(self.data_root),
        }
