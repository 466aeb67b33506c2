"""Checkpoint names, dependency gates and model loading for a run directory."""

from pathlib import Path
from typing import Callable, Dict

import numpy as np
import torch.nn as nn

from config.settings import AppSettings
from latentgan.networks import LatentGenerator, build_generator
from partae.networks import PartAutoEncoder, build_part_ae, freeze
from seq2seq.networks import Seq2SeqAE, build_seq2seq
from tasks.svr import build_image_encoder
from utils.exceptions import raise_dependency_error
from utils.logging_config import get_logger
from utils.tensor_io import load_checkpoint, load_into, load_latent_table
from utils.utils import resolve_device

logger = get_logger(__name__)

CHECKPOINTS = {
    "partae": "partae.pqck",
    "seq2seq": "seq2seq.pqck",
    "completion": "completion.pqck",
    "denoise": "denoise.pqck",
    "gan": "gan_generator.pqck",
    "svr-depth": "svr_depth.pqck",
    "svr-rgb": "svr_rgb.pqck",
}
LATENT_TABLE = "latents.pqlt"


class RunArtifacts:
    def __init__(self, settings: AppSettings):
        self.settings = settings
        self.checkpoint_dir = Path(settings.directories.checkpoint_dir)
        self.device = resolve_device(settings.processing.device)

    def path(self, stage: str) -> Path:
        return self.checkpoint_dir / CHECKPOINTS[stage]

    @property
    def latent_path(self) -> Path:
        return self.checkpoint_dir / LATENT_TABLE

    def require(self, *stages: str) -> None:
        """Raise DependencyError naming the first stage whose checkpoint is missing."""
        for stage in stages:
            if not self.path(stage).exists():
                raise_dependency_error(
                    f"Missing {stage} checkpoint {self.path(stage)}; run `train {stage.split('-')[0]}` first"
                )

    def require_latents(self) -> None:
        if not self.latent_path.exists():
            raise_dependency_error(
                f"Missing latent table {self.latent_path}; run `train seq2seq` first"
            )

    def _load(self, stage: str, builder: Callable[[Dict], nn.Module]) -> nn.Module:
        self.require(stage)
        state, meta = load_checkpoint(self.path(stage))
        model = load_into(builder(meta), state).to(self.device)
        logger.debug(f"Loaded {stage} from {self.path(stage)}")
        return freeze(model)

    def partae(self) -> PartAutoEncoder:
        return self._load("partae", build_part_ae)

    def seq2seq(self, stage: str = "seq2seq") -> Seq2SeqAE:
        return self._load(stage, build_seq2seq)

    def generator(self) -> LatentGenerator:
        return self._load("gan", build_generator)

    def image_encoder(self, branch: str) -> nn.Module:
        return self._load(f"svr-{branch}", build_image_encoder)

    def latents(self) -> Dict[str, np.ndarray]:
        self.require_latents()
        return load_latent_table(self.latent_path)
