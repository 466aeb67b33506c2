from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from tqdm import tqdm

from config.settings import PartAESettings
from datakit.voxels import downsample, upsample
from models.records import PartRecord
from partae.losses import part_loss_tensor
from partae.networks import INPUT_RESOLUTION, PartAutoEncoder, build_part_ae
from utils.exceptions import raise_invalid_input
from utils.file_utils import write_rows_csv
from utils.logging_config import get_logger
from utils.tensor_io import save_checkpoint
from utils.utils import torch_generator

logger = get_logger(__name__)


def stage_input(part: PartRecord, resolution: int) -> np.ndarray:
    """The 64^3 encoder input seen at a stage: downsampled, then NN-upsampled."""
    if resolution == INPUT_RESOLUTION:
        return part.volume64.occupancy
    coarse = downsample(part.volume64, resolution)
    return upsample(coarse, INPUT_RESOLUTION).occupancy


class PartAETrainer:
    """
    Progressive training of the part autoencoder.

    Each stage trains on field samples of its resolution tag with the encoder
    fed that resolution's volume upsampled back to 64^3. A checkpoint is
    written after every stage.
    """

    def __init__(
        self,
        settings: PartAESettings,
        seed: int = 0,
        device: str = "cpu",
        checkpoint_dir: Optional[Path] = None,
        points_per_step: Optional[int] = None,
        model: Optional[PartAutoEncoder] = None,
    ):
        self.settings = settings
        self.seed = seed
        self.device = torch.device(device)
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.points_per_step = points_per_step
        if model is None:
            torch.manual_seed(seed)
            model = build_part_ae(
                {
                    "code_dim": settings.code_dim,
                    "encoder_channels": settings.encoder_channels,
                    "decoder_widths": settings.decoder_widths,
                    "dropout": settings.dropout,
                }
            )
        self.model = model.to(self.device)
        self.log: List[Dict] = []
        self.saved: List[Path] = []

    def _validate(self, corpus: Sequence[PartRecord], schedule) -> None:
        if not corpus:
            raise_invalid_input("Part autoencoder corpus is empty")
        for resolution, _ in schedule:
            for i, part in enumerate(corpus):
                if resolution not in part.samples:
                    raise_invalid_input(
                        f"Part {i} has no field samples for resolution {resolution}"
                    )

    def _stage_tensors(self, corpus, resolution) -> Tuple[torch.Tensor, ...]:
        volumes = np.stack([stage_input(p, resolution) for p in corpus]).astype(np.float32)
        points = np.stack([p.samples[resolution].points for p in corpus])
        values = np.stack([p.samples[resolution].values for p in corpus])
        return (
            torch.from_numpy(volumes)[:, None],
            torch.from_numpy(points),
            torch.from_numpy(values),
        )

    def train_stage(self, corpus, resolution: int, epochs: int) -> List[Dict]:
        volumes, points, values = self._stage_tensors(corpus, resolution)
        optimizer = torch.optim.Adam(self.model.parameters(), lr=self.settings.learning_rate)
        generator = torch_generator(self.seed + resolution)
        n = len(corpus)
        batch = self.settings.batch_size
        rows = []

        self.model.train()
        for epoch in tqdm(range(epochs), desc=f"partae {resolution}^3", leave=False):
            order = torch.randperm(n, generator=generator)
            total, count = 0.0, 0
            for start in range(0, n, batch):
                idx = order[start : start + batch]
                pts, vals = points[idx], values[idx]
                if self.points_per_step and self.points_per_step < pts.shape[1]:
                    pick = torch.randperm(pts.shape[1], generator=generator)[: self.points_per_step]
                    pts, vals = pts[:, pick], vals[:, pick]
                pred = self.model(volumes[idx].to(self.device), pts.to(self.device))
                loss = part_loss_tensor(pred, vals.to(self.device))
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += loss.item() * len(idx)
                count += len(idx)
            row = {"epoch": epoch, "stage": resolution, "loss": total / count}
            rows.append(row)
            logger.debug(f"partae stage {resolution} epoch {epoch}: loss={row['loss']:.6f}")

        if rows:
            logger.info(f"partae stage {resolution}^3 final loss {rows[-1]['loss']:.6f}")
        if self.checkpoint_dir is not None:
            path = self.checkpoint_dir / f"partae_{resolution}.pqck"
            self.saved.append(
                save_checkpoint(path, self.model.state_dict(), {**self.model.config, "stage": resolution})
            )
        return rows

    def train(self, corpus: Sequence[PartRecord], schedule=None) -> Tuple[PartAutoEncoder, List[Dict]]:
        """
        Args:
            corpus: Parts with samples for every scheduled resolution
            schedule: [(resolution, epochs), ...]; defaults to the settings

        Returns:
            (trained model, per-epoch loss rows)
        """
        schedule = schedule or list(
            zip(self.settings.stage_resolutions, self.settings.stage_epochs)
        )
        self._validate(corpus, schedule)
        for resolution, epochs in schedule:
            logger.info(f"[*] Training part autoencoder at {resolution}^3 for {epochs} epochs...")
            self.log.extend(self.train_stage(corpus, resolution, epochs))
        if self.checkpoint_dir is not None:
            self.saved += [
                save_checkpoint(self.checkpoint_dir / "partae.pqck", self.model.state_dict(), self.model.config),
                write_rows_csv(self.checkpoint_dir.parent / "logs" / "partae_loss.csv", self.log),
            ]
        self.model.eval()
        return self.model, self.log


def train_part_ae(
    corpus: Sequence[PartRecord],
    settings: PartAESettings,
    schedule=None,
    seed: int = 0,
    **kwargs,
) -> Tuple[PartAutoEncoder, List[Dict]]:
    return PartAETrainer(settings, seed=seed, **kwargs).train(corpus, schedule)
