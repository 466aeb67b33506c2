from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from config.settings import AppSettings
from commands.artifacts import RunArtifacts
from datakit.formats import load_dataset
from latentgan.trainer import LatentGanTrainer
from models.records import ShapeRecord
from partae.trainer import PartAETrainer
from seq2seq.trainer import Seq2SeqTrainer, build_sequences, encode_latents, reconstruction_report
from tasks.svr import SvrTrainer
from utils.exceptions import raise_invalid_input
from utils.logging_config import get_logger
from utils.tensor_io import save_latent_table
from utils.utils import derive_seed

logger = get_logger(__name__)

STAGES = ("partae", "seq2seq", "gan", "svr", "completion", "denoise")
SEQUENCE_MODES = {"seq2seq": "autoencode", "completion": "complete", "denoise": "denoise"}


class StageTrainer:
    """
    Trains one stage of the pipeline from the prepared dataset.

    Dependencies:
        seq2seq, completion, denoise: partae checkpoint
        gan, svr: seq2seq checkpoint and its latent table
    """

    def __init__(self, kwargs: Dict[str, Any], settings: AppSettings):
        self.settings = settings
        self.stage = kwargs.get("stage")
        if self.stage not in STAGES:
            raise_invalid_input(f"Unknown training stage: {self.stage}")
        self.epochs = kwargs.get("epochs")
        self.branch = kwargs.get("branch") or settings.svr.branch
        self.seed = derive_seed(settings.processing.seed, "train", self.stage)
        self.artifacts = RunArtifacts(settings)
        self.common = {
            "device": str(self.artifacts.device),
            "checkpoint_dir": self.artifacts.checkpoint_dir,
        }
        self.produced: List[Path] = []

    def _corpus(self, load_samples: bool = False) -> List[ShapeRecord]:
        corpus = load_dataset(
            self.settings.directories.data_root,
            self.settings.data.categories,
            split="train",
            load_samples=load_samples,
        )
        if not corpus:
            raise_invalid_input(
                f"No training shapes under {self.settings.directories.data_root}; run `prepare` first"
            )
        return corpus

    def _train_partae(self) -> Dict[str, Any]:
        settings = self.settings.partae
        if self.epochs:
            settings = settings.model_copy(
                update={"stage_epochs": [self.epochs] * len(settings.stage_resolutions)}
            )
        parts = [part for record in self._corpus(load_samples=True) for part in record.parts]
        trainer = PartAETrainer(settings, seed=self.seed, **self.common)
        _, log = trainer.train(parts)
        self.produced += trainer.saved
        return {"final_loss": log[-1]["loss"] if log else None, "parts": len(parts)}

    def _train_sequences(self) -> Dict[str, Any]:
        self.artifacts.require("partae")
        partae = self.artifacts.partae()
        settings = self.settings.seq2seq
        if self.epochs:
            settings = settings.model_copy(update={"epochs": self.epochs})
        k_max = self.settings.data.k_max
        sequences = build_sequences(self._corpus(), partae, k_max)
        trainer = Seq2SeqTrainer(
            settings, partae.code_dim, k_max, seed=self.seed,
            mode=SEQUENCE_MODES[self.stage], **self.common,
        )
        model, log = trainer.train(sequences)
        self.produced += trainer.saved
        metrics = {"final_loss": log[-1]["loss"] if log else None}
        if self.stage == "seq2seq":
            save_latent_table(self.artifacts.latent_path, encode_latents(model, sequences))
            self.produced.append(self.artifacts.latent_path)
            metrics.update(reconstruction_report(model, sequences))
        return metrics

    def _train_gan(self) -> Dict[str, Any]:
        self.artifacts.require("seq2seq")
        latents = self.artifacts.latents()
        if not latents:
            raise_invalid_input("Latent table is empty")
        settings = self.settings.gan
        if self.epochs:
            settings = settings.model_copy(update={"iterations": self.epochs})
        table = np.stack([latents[k] for k in sorted(latents)]).astype(np.float32)
        trainer = LatentGanTrainer(settings, table.shape[1], seed=self.seed, **self.common)
        _, _, log = trainer.train(table)
        self.produced += trainer.saved
        return {"final_wasserstein": log[-1]["wasserstein"] if log else None}

    def _train_svr(self) -> Dict[str, Any]:
        self.artifacts.require("seq2seq")
        latents = self.artifacts.latents()
        seq2seq = self.artifacts.seq2seq()
        trainer = SvrTrainer(self.settings.svr, seq2seq, self.branch, self.seed, **self.common)
        _, log = trainer.train(self._corpus(), latents, self.epochs)
        self.produced += trainer.saved
        return {"final_latent_mse": log[-1]["latent_mse"] if log else None}

    def train(self) -> Dict[str, Any]:
        logger.info(f"[*] Training stage {self.stage}...")
        if self.stage == "partae":
            return self._train_partae()
        if self.stage in SEQUENCE_MODES:
            return self._train_sequences()
        if self.stage == "gan":
            return self._train_gan()
        return self._train_svr()
