"""
Single-view reconstruction: regress an image to a shape latent, then decode
it with the frozen sequence decoder.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
from torchvision.models import resnet18
from tqdm import tqdm

from config.settings import SvrSettings
from datakit.render import IMAGE_RESOLUTION
from metrics.set_metrics import box_fill_iou
from models.records import ShapeRecord
from models.sequences import DecodedStep
from partae.networks import freeze
from seq2seq.networks import Seq2SeqAE, decode_sequence
from utils.exceptions import InvariantViolation, raise_invalid_input
from utils.file_utils import write_rows_csv
from utils.logging_config import get_logger
from utils.tensor_io import parameter_checksum, save_checkpoint
from utils.utils import derive_seed, torch_generator

logger = get_logger(__name__)

BRANCHES = ("depth", "rgb")


class DepthEncoder(nn.Module):
    """Four strided convolutions and a linear head: 64^2 depth -> latent."""

    def __init__(self, channels: Sequence[int] = (32, 64, 128, 256), latent_dim: int = 1024):
        super().__init__()
        if len(channels) != 4:
            raise_invalid_input(f"Depth encoder takes four conv widths, got {list(channels)}")
        layers = []
        prev = 1
        for width in channels:
            layers += [
                nn.Conv2d(prev, width, kernel_size=4, stride=2, padding=1),
                nn.BatchNorm2d(width),
                nn.LeakyReLU(0.2),
            ]
            prev = width
        self.conv = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(4)
        self.head = nn.Linear(prev * 16, latent_dim)
        self.config = {"kind": "depth", "channels": list(channels), "latent_dim": latent_dim}

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.head(self.pool(self.conv(images)).flatten(1))


class RgbEncoder(nn.Module):
    """18-layer residual network regressing an RGB image to a latent."""

    def __init__(self, latent_dim: int = 1024):
        super().__init__()
        self.net = resnet18(weights=None, num_classes=latent_dim)
        self.config = {"kind": "rgb", "latent_dim": latent_dim}

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.net(images)


def build_image_encoder(config: Dict[str, Any]) -> nn.Module:
    if config["kind"] == "depth":
        return DepthEncoder(config["channels"], config["latent_dim"])
    if config["kind"] == "rgb":
        return RgbEncoder(config["latent_dim"])
    raise_invalid_input(f"Unknown image encoder kind: {config['kind']}")


def image_tensor(image: np.ndarray, branch: str) -> torch.Tensor:
    """
    (C, H, W) float tensor of one view.

    Depth maps are (H, W) in [0, 1]; RGB images are (H, W, 3) uint8.
    """
    image = np.asarray(image)
    if branch == "depth":
        if image.ndim != 2 or image.shape[0] != image.shape[1]:
            raise_invalid_input(f"Depth input must be a square 2-D map, got {image.shape}")
        if not np.isfinite(image).all() or image.min() < 0.0 or image.max() > 1.0:
            raise_invalid_input("Depth values must lie in [0, 1]")
        return torch.from_numpy(image.astype(np.float32))[None]
    if branch == "rgb":
        if image.ndim != 3 or image.shape[2] != 3:
            raise_invalid_input(f"RGB input must be (H, W, 3), got {image.shape}")
        return torch.from_numpy(image.astype(np.float32) / 255.0).permute(2, 0, 1)
    raise_invalid_input(f"Unknown SVR branch: {branch}")


def record_views(record: ShapeRecord, branch: str) -> List[np.ndarray]:
    if branch == "depth":
        return [view.values for view in record.depth_views]
    return list(record.rgb_views)


class SvrTrainer:
    """
    Fits an image encoder to precomputed shape latents.

    The sequence decoder is frozen; its parameter checksum is compared
    before and after training.
    """

    def __init__(
        self,
        settings: SvrSettings,
        seq2seq: Seq2SeqAE,
        branch: Optional[str] = None,
        seed: int = 0,
        device: str = "cpu",
        checkpoint_dir: Optional[Path] = None,
    ):
        self.settings = settings
        self.branch = branch or settings.branch
        if self.branch not in BRANCHES:
            raise_invalid_input(f"Unknown SVR branch: {self.branch}")
        self.seq2seq = freeze(seq2seq)
        self.seed = seed
        self.device = torch.device(device)
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        torch.manual_seed(derive_seed(seed, "svr", self.branch))
        if self.branch == "depth":
            encoder = DepthEncoder(settings.depth_channels, seq2seq.latent_dim)
        else:
            encoder = RgbEncoder(seq2seq.latent_dim)
        self.encoder = encoder.to(self.device)
        self.log: List[Dict] = []
        self.saved: List[Path] = []

    def _pairs(self, corpus: Sequence[ShapeRecord], latents: Dict[str, np.ndarray]):
        images, targets = [], []
        for record in corpus:
            if record.shape_id not in latents:
                raise_invalid_input(f"No latent for shape {record.shape_id}")
            views = record_views(record, self.branch)
            if not views:
                raise_invalid_input(f"Shape {record.shape_id} has no {self.branch} views")
            for view in views:
                images.append(image_tensor(view, self.branch))
                targets.append(np.asarray(latents[record.shape_id], dtype=np.float32))
        return torch.stack(images), torch.from_numpy(np.stack(targets))

    def train(
        self,
        corpus: Sequence[ShapeRecord],
        latents: Dict[str, np.ndarray],
        epochs: Optional[int] = None,
    ) -> Tuple[nn.Module, List[Dict]]:
        if not corpus:
            raise_invalid_input("SVR corpus is empty")
        images, targets = self._pairs(corpus, latents)
        epochs = self.settings.epochs if epochs is None else epochs
        before = parameter_checksum(self.seq2seq.decoder)

        optimizer = torch.optim.Adam(self.encoder.parameters(), lr=self.settings.learning_rate)
        generator = torch_generator(derive_seed(self.seed, "svr", "shuffle"))
        n, batch = len(images), self.settings.batch_size
        logger.info(f"[*] Training {self.branch} SVR encoder on {n} views for {epochs} epochs...")
        for epoch in tqdm(range(epochs), desc=f"svr {self.branch}", leave=False):
            self.encoder.train()
            order = torch.randperm(n, generator=generator)
            total = 0.0
            for start in range(0, n, batch):
                idx = order[start : start + batch]
                pred = self.encoder(images[idx].to(self.device))
                loss = ((pred - targets[idx].to(self.device)) ** 2).mean()
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += loss.item() * len(idx)
            self.log.append({"epoch": epoch, "latent_mse": total / n})

        if parameter_checksum(self.seq2seq.decoder) != before:
            raise InvariantViolation("SVR training modified the frozen sequence decoder")
        self.encoder.eval()
        if self.checkpoint_dir is not None:
            self.saved += [
                save_checkpoint(
                    self.checkpoint_dir / f"svr_{self.branch}.pqck",
                    self.encoder.state_dict(),
                    self.encoder.config,
                ),
                write_rows_csv(self.checkpoint_dir.parent / "logs" / f"svr_{self.branch}_loss.csv", self.log),
            ]
        return self.encoder, self.log


def train_svr(
    corpus: Sequence[ShapeRecord],
    latents: Dict[str, np.ndarray],
    seq2seq: Seq2SeqAE,
    settings: SvrSettings,
    branch: Optional[str] = None,
    seed: int = 0,
    epochs: Optional[int] = None,
    **kwargs,
) -> Tuple[nn.Module, List[Dict]]:
    return SvrTrainer(settings, seq2seq, branch, seed, **kwargs).train(corpus, latents, epochs)


@torch.no_grad()
def predict_latent(image: np.ndarray, encoder: nn.Module, branch: str) -> np.ndarray:
    encoder.eval()
    device = next(encoder.parameters()).device
    return encoder(image_tensor(image, branch)[None].to(device))[0].cpu().numpy()


def svr_infer(
    image: np.ndarray, encoder: nn.Module, seq2seq: Seq2SeqAE, branch: str = "depth"
) -> Tuple[np.ndarray, List[DecodedStep]]:
    """Image -> (predicted latent, decoded part sequence)."""
    h_z = predict_latent(image, encoder, branch)
    return h_z, decode_sequence(h_z, seq2seq)


def evaluate_box_iou(
    corpus: Sequence[ShapeRecord],
    encoder: nn.Module,
    seq2seq: Seq2SeqAE,
    branch: str = "depth",
    resolution: int = IMAGE_RESOLUTION,
    view_index: int = 0,
) -> Dict[str, float]:
    """
    Structure-only SVR score: box-fill IoU of decoded boxes against the
    ground-truth boxes, averaged over shapes.
    """
    scores = []
    for record in corpus:
        views = record_views(record, branch)
        if view_index >= len(views):
            raise_invalid_input(f"Shape {record.shape_id} has no {branch} view {view_index}")
        _, steps = svr_infer(views[view_index], encoder, seq2seq, branch)
        predicted = [step.box.clamped(resolution) for step in steps]
        scores.append(box_fill_iou(predicted, record.boxes(), resolution))
    if not scores:
        raise_invalid_input("Box IoU evaluation needs at least one shape")
    return {"box_iou": float(np.mean(scores)), "shapes": len(scores)}
