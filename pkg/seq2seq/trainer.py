from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from tqdm import tqdm

from config.settings import Seq2SeqSettings
from models.records import ShapeRecord
from models.sequences import StepVector, box_mse
from partae.networks import PartAutoEncoder, volume_tensor
from seq2seq.corruption import MODES, corrupt
from seq2seq.losses import (
    reconstruction_loss_tensor,
    stop_loss_tensor,
    total_loss_tensor,
)
from seq2seq.networks import Seq2SeqAE, build_seq2seq, decode_sequence, encode_sequence
from seq2seq.steps import assemble_step_vectors, pack_steps, pad_batch
from utils.exceptions import raise_invalid_input
from utils.file_utils import write_rows_csv
from utils.logging_config import format_losses_for_log, get_logger
from utils.tensor_io import save_checkpoint
from utils.utils import derive_seed, torch_generator

logger = get_logger(__name__)

ShapeSequence = Tuple[str, List[StepVector]]


@torch.no_grad()
def encode_parts(
    corpus: Sequence[ShapeRecord], partae: PartAutoEncoder, batch_size: int = 32
) -> Dict[str, List[np.ndarray]]:
    """Codes of every part, computed by the frozen part encoder."""
    partae.eval()
    device = next(partae.parameters()).device
    flat = [(r.shape_id, part) for r in corpus for part in r.parts]
    codes: Dict[str, List[np.ndarray]] = {r.shape_id: [] for r in corpus}
    for start in range(0, len(flat), batch_size):
        chunk = flat[start : start + batch_size]
        volumes = torch.cat([volume_tensor(p.volume64) for _, p in chunk]).to(device)
        for (shape_id, _), code in zip(chunk, partae.encode(volumes).cpu().numpy()):
            codes[shape_id].append(code)
    return codes


def build_sequences(
    corpus: Sequence[ShapeRecord], partae: PartAutoEncoder, k_max: int
) -> List[ShapeSequence]:
    for record in corpus:
        if record.part_count > k_max:
            raise_invalid_input(
                f"Shape {record.shape_id} has {record.part_count} parts > K_max={k_max}"
            )
    codes = encode_parts(corpus, partae)
    return [
        (r.shape_id, assemble_step_vectors(r, codes[r.shape_id], k_max)) for r in corpus
    ]


class Seq2SeqTrainer:
    """
    Trains the sequence autoencoder on precomputed part codes.

    Modes:
        autoencode: input = target sequence
        complete: input drops up to k-1 parts, target is the full sequence
        denoise: input is a random permutation, target the canonical order
    """

    def __init__(
        self,
        settings: Seq2SeqSettings,
        code_dim: int,
        k_max: int,
        seed: int = 0,
        mode: str = "autoencode",
        device: str = "cpu",
        checkpoint_dir: Optional[Path] = None,
        model: Optional[Seq2SeqAE] = None,
    ):
        if mode not in MODES:
            raise_invalid_input(f"Unknown training mode: {mode}")
        self.settings = settings
        self.seed = seed
        self.mode = mode
        self.device = torch.device(device)
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        if model is None:
            torch.manual_seed(seed)
            model = build_seq2seq(
                {
                    "code_dim": code_dim,
                    "k_max": k_max,
                    "encoder_hidden": settings.encoder_hidden,
                    "decoder_hidden": settings.decoder_hidden,
                    "num_layers": settings.num_layers,
                    "dropout": settings.dropout,
                }
            )
        self.model = model.to(self.device)
        self.log: List[Dict] = []
        # every file written by this trainer, in write order
        self.saved: List[Path] = []

    @property
    def checkpoint_name(self) -> str:
        return {"autoencode": "seq2seq", "complete": "completion", "denoise": "denoise"}[self.mode]

    def _batch(self, sequences: Sequence[List[StepVector]], rng: np.random.Generator):
        inputs = [pack_steps(corrupt(steps, self.mode, rng)) for steps in sequences]
        targets = [pack_steps(steps)[:, : self.model.code_dim + 6] for steps in sequences]
        x, x_len = pad_batch(inputs)
        y, y_len = pad_batch(targets)
        return x.to(self.device), x_len, y.to(self.device), y_len

    def batch_losses(self, x, x_len, y, y_len) -> Tuple[torch.Tensor, torch.Tensor]:
        """Per-shape (reconstruction, stop) terms for one padded batch."""
        code_dim = self.model.code_dim
        pred_g, pred_b, stop_logits = self.model(x, x_len, y)
        recon = reconstruction_loss_tensor(
            pred_g, pred_b, y[..., :code_dim], y[..., code_dim:], y_len.to(self.device), self.settings.beta
        )
        stop = stop_loss_tensor(stop_logits, y_len.to(self.device))
        return recon, stop

    def train(
        self, sequences: Sequence[ShapeSequence], epochs: Optional[int] = None
    ) -> Tuple[Seq2SeqAE, List[Dict]]:
        if not sequences:
            raise_invalid_input("Sequence corpus is empty")
        for shape_id, steps in sequences:
            if len(steps) > self.model.k_max:
                raise_invalid_input(f"Shape {shape_id} exceeds K_max={self.model.k_max}")

        epochs = self.settings.epochs if epochs is None else epochs
        optimizer = torch.optim.Adam(self.model.parameters(), lr=self.settings.learning_rate)
        generator = torch_generator(derive_seed(self.seed, "shuffle", self.mode))
        batch = self.settings.batch_size
        n = len(sequences)

        logger.info(f"[*] Training seq2seq ({self.mode}) on {n} shapes for {epochs} epochs...")
        for epoch in tqdm(range(epochs), desc=f"seq2seq {self.mode}", leave=False):
            self.model.train()
            rng = np.random.default_rng(derive_seed(self.seed, self.mode, epoch))
            order = torch.randperm(n, generator=generator).tolist()
            sums = {"loss": 0.0, "reconstruction": 0.0, "stop": 0.0}
            for start in range(0, n, batch):
                chunk = [sequences[i][1] for i in order[start : start + batch]]
                recon, stop = self.batch_losses(*self._batch(chunk, rng))
                loss = total_loss_tensor(recon, stop, self.settings.alpha)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                sums["loss"] += loss.item() * len(chunk)
                sums["reconstruction"] += recon.sum().item()
                sums["stop"] += stop.sum().item()
            row = {"epoch": epoch, **{k: v / n for k, v in sums.items()}}
            self.log.append(row)
            logger.debug(f"seq2seq epoch {epoch}: {format_losses_for_log(row)}")

            every = self.settings.checkpoint_every
            if self.checkpoint_dir is not None and every and (epoch + 1) % every == 0:
                self.save(f"{self.checkpoint_name}_e{epoch + 1}.pqck")

        if self.checkpoint_dir is not None:
            self.save(f"{self.checkpoint_name}.pqck")
            self.saved.append(
                write_rows_csv(
                    self.checkpoint_dir.parent / "logs" / f"{self.checkpoint_name}_loss.csv", self.log
                )
            )
        self.model.eval()
        return self.model, self.log

    def save(self, name: str) -> Path:
        path = save_checkpoint(self.checkpoint_dir / name, self.model.state_dict(), self.model.config)
        self.saved.append(path)
        return path


def train_seq2seq(
    corpus: Sequence[ShapeRecord],
    partae: PartAutoEncoder,
    settings: Seq2SeqSettings,
    k_max: int = 10,
    seed: int = 0,
    mode: str = "autoencode",
    **kwargs,
) -> Tuple[Seq2SeqAE, List[Dict]]:
    """Freeze the part autoencoder, encode every part and train on the sequences."""
    partae.eval()
    for param in partae.parameters():
        param.requires_grad_(False)
    sequences = build_sequences(corpus, partae, k_max)
    trainer = Seq2SeqTrainer(settings, partae.code_dim, k_max, seed=seed, mode=mode, **kwargs)
    return trainer.train(sequences)


def encode_latents(model: Seq2SeqAE, sequences: Sequence[ShapeSequence]) -> Dict[str, np.ndarray]:
    return {shape_id: encode_sequence(steps, model) for shape_id, steps in sequences}


def reconstruction_report(model: Seq2SeqAE, sequences: Sequence[ShapeSequence]) -> Dict[str, float]:
    """Stop-sign step-count accuracy and mean box MSE of encode -> decode."""
    correct, mses = 0, []
    for _, steps in sequences:
        decoded = decode_sequence(encode_sequence(steps, model), model)
        if len(decoded) == len(steps):
            correct += 1
            mses.append(box_mse(decoded, [s.b for s in steps]))
    return {
        "step_count_accuracy": correct / len(sequences),
        "box_mse": float(np.mean(mses)) if mses else float("nan"),
    }
