from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn
from torch.nn.utils.rnn import pack_padded_sequence

from models.sequences import DecodedStep, StepVector
from seq2seq.steps import pack_steps
from utils.exceptions import raise_invalid_input

STOP_THRESHOLD = 0.5


class SequenceEncoder(nn.Module):
    """Bidirectional stacked GRU; h_z is its final states [l0 fwd; l0 bwd; l1 fwd; l1 bwd]."""

    def __init__(self, input_dim: int, hidden: int = 256, num_layers: int = 2, dropout: float = 0.2):
        super().__init__()
        self.rnn = nn.GRU(
            input_dim,
            hidden,
            num_layers=num_layers,
            bidirectional=True,
            batch_first=True,
            dropout=dropout if num_layers > 1 else 0.0,
        )

    def forward(self, steps: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        packed = pack_padded_sequence(
            steps, lengths.cpu(), batch_first=True, enforce_sorted=False
        )
        _, h_n = self.rnn(packed)  # (layers * 2, B, H)
        return h_n.permute(1, 0, 2).reshape(steps.shape[0], -1)


class StackedDecoder(nn.Module):
    """
    Two-layer GRU decoder with separate read-outs per layer.

    The bottom layer state h^S drives the box and stop heads; the top layer
    state h^G drives the geometry head.
    """

    def __init__(
        self,
        code_dim: int = 128,
        hidden: int = 512,
        dropout: float = 0.2,
        geometry_hidden: Optional[int] = None,
        structure_hidden: Optional[int] = None,
    ):
        super().__init__()
        step_dim = code_dim + 6
        geometry_hidden = geometry_hidden or hidden // 2
        structure_hidden = structure_hidden or hidden // 4
        self.cell_s = nn.GRUCell(step_dim, hidden)
        self.cell_g = nn.GRUCell(hidden, hidden)
        self.dropout = nn.Dropout(dropout)
        self.geometry_head = nn.Sequential(
            nn.Linear(hidden, geometry_hidden), nn.LeakyReLU(0.2), nn.Linear(geometry_hidden, code_dim)
        )
        self.box_head = nn.Sequential(
            nn.Linear(hidden, structure_hidden), nn.ReLU(), nn.Linear(structure_hidden, 6)
        )
        self.stop_head = nn.Sequential(
            nn.Linear(hidden, structure_hidden), nn.ReLU(), nn.Linear(structure_hidden, 1)
        )
        self.hidden = hidden
        self.step_dim = step_dim

    def split_latent(self, h_z: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        return h_z[:, : self.hidden], h_z[:, self.hidden :]

    def step(
        self, x: torch.Tensor, h_s: torch.Tensor, h_g: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """
        One decoding step.

        Returns:
            (g', b', stop logit, new h^S, new h^G)
        """
        h_s = self.cell_s(x, h_s)
        h_g = self.cell_g(self.dropout(h_s), h_g)
        return (
            self.geometry_head(h_g),
            self.box_head(h_s),
            self.stop_head(h_s).squeeze(-1),
            h_s,
            h_g,
        )

    def teacher_forced(
        self, h_z: torch.Tensor, targets: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """
        Decode len(targets) steps feeding ground-truth [g; b] of the previous step.

        Args:
            h_z: (B, 2 * hidden)
            targets: (B, T, code_dim + 6)

        Returns:
            (g' (B, T, C), b' (B, T, 6), stop logits (B, T))
        """
        h_s, h_g = self.split_latent(h_z)
        x = h_z.new_zeros(h_z.shape[0], self.step_dim)
        gs, bs, ss = [], [], []
        for t in range(targets.shape[1]):
            g, b, s, h_s, h_g = self.step(x, h_s, h_g)
            gs.append(g)
            bs.append(b)
            ss.append(s)
            x = targets[:, t]
        return torch.stack(gs, 1), torch.stack(bs, 1), torch.stack(ss, 1)


class Seq2SeqAE(nn.Module):
    def __init__(
        self,
        code_dim: int = 128,
        k_max: int = 10,
        encoder_hidden: int = 256,
        decoder_hidden: int = 512,
        num_layers: int = 2,
        dropout: float = 0.2,
    ):
        super().__init__()
        if num_layers * 2 * encoder_hidden != 2 * decoder_hidden:
            raise_invalid_input(
                "Encoder states must split evenly into the two decoder layers"
            )
        self.encoder = SequenceEncoder(code_dim + 6 + k_max, encoder_hidden, num_layers, dropout)
        self.decoder = StackedDecoder(code_dim, decoder_hidden, dropout)
        self.config = {
            "kind": "seq2seq",
            "code_dim": code_dim,
            "k_max": k_max,
            "encoder_hidden": encoder_hidden,
            "decoder_hidden": decoder_hidden,
            "num_layers": num_layers,
            "dropout": dropout,
        }

    @property
    def latent_dim(self) -> int:
        return 2 * self.config["decoder_hidden"]

    @property
    def code_dim(self) -> int:
        return self.config["code_dim"]

    @property
    def k_max(self) -> int:
        return self.config["k_max"]

    def encode(self, steps: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        return self.encoder(steps, lengths)

    def forward(self, steps, lengths, targets):
        return self.decoder.teacher_forced(self.encode(steps, lengths), targets)


def build_seq2seq(config: Dict[str, Any]) -> Seq2SeqAE:
    return Seq2SeqAE(
        code_dim=config["code_dim"],
        k_max=config["k_max"],
        encoder_hidden=config["encoder_hidden"],
        decoder_hidden=config["decoder_hidden"],
        num_layers=config["num_layers"],
        dropout=config["dropout"],
    )


def _device(model: nn.Module) -> torch.device:
    return next(model.parameters()).device


@torch.no_grad()
def encode_sequence(steps: List[StepVector], model: Seq2SeqAE) -> np.ndarray:
    if not steps:
        raise_invalid_input("Cannot encode an empty part sequence")
    if len(steps) > model.k_max:
        raise_invalid_input(f"Sequence of {len(steps)} parts exceeds K_max={model.k_max}")
    model.eval()
    packed = torch.from_numpy(pack_steps(steps))[None].to(_device(model))
    lengths = torch.tensor([len(steps)])
    return model.encode(packed, lengths)[0].cpu().numpy()


@torch.no_grad()
def decode_sequence(
    h_z: np.ndarray,
    model: Seq2SeqAE,
    max_steps: Optional[int] = None,
    min_steps: int = 1,
) -> List[DecodedStep]:
    """
    Decode a shape latent part by part, feeding back predicted [g'; b'].

    Emission stops after the first step whose stop probability exceeds 0.5,
    ignoring the stop sign before `min_steps`, or at `max_steps`.
    """
    if max_steps is None:
        max_steps = model.k_max
    if max_steps < 1:
        raise_invalid_input(f"max_steps must be >= 1, got {max_steps}")
    min_steps = max(1, min(min_steps, max_steps))
    model.eval()
    decoder = model.decoder
    device = _device(model)
    h = torch.as_tensor(np.asarray(h_z, dtype=np.float32), device=device).reshape(1, -1)
    if h.shape[1] != model.latent_dim:
        raise_invalid_input(f"Latent has {h.shape[1]} components, expected {model.latent_dim}")

    h_s, h_g = decoder.split_latent(h)
    x = h.new_zeros(1, decoder.step_dim)
    out: List[DecodedStep] = []
    for i in range(max_steps):
        g, b, s_logit, h_s, h_g = decoder.step(x, h_s, h_g)
        s = torch.sigmoid(s_logit)
        out.append(DecodedStep(g=g[0].cpu().numpy(), b=b[0].cpu().numpy(), s=float(s[0])))
        if i + 1 >= min_steps and float(s[0]) > STOP_THRESHOLD:
            break
        x = torch.cat([g, b], dim=-1)
    return out
