"""Toy-width models and rigged variants for fast tests."""

import numpy as np
import torch

from latentgan.networks import LatentGenerator
from partae.networks import PartAutoEncoder
from seq2seq.networks import Seq2SeqAE

CODE_DIM = 8
K_MAX = 4


def tiny_partae(seed: int = 0, code_dim: int = CODE_DIM) -> PartAutoEncoder:
    torch.manual_seed(seed)
    return PartAutoEncoder(
        code_dim=code_dim, encoder_channels=(2, 4), decoder_widths=(16, 16, 8), dropout=0.0
    ).eval()


def tiny_seq2seq(seed: int = 0, code_dim: int = CODE_DIM, k_max: int = K_MAX, hidden: int = 8) -> Seq2SeqAE:
    torch.manual_seed(seed)
    return Seq2SeqAE(
        code_dim=code_dim,
        k_max=k_max,
        encoder_hidden=hidden,
        decoder_hidden=2 * hidden,
        num_layers=2,
        dropout=0.0,
    ).eval()


def tiny_generator(seed: int = 0, latent_dim: int = 32, z_dim: int = 4) -> LatentGenerator:
    torch.manual_seed(seed)
    return LatentGenerator(z_dim=z_dim, widths=(16, 16, 16), latent_dim=latent_dim).eval()


def rig_stop(model: Seq2SeqAE, logit: float) -> Seq2SeqAE:
    """Make the stop head emit the same logit at every step."""
    last = model.decoder.stop_head[-1]
    with torch.no_grad():
        last.weight.zero_()
        last.bias.fill_(logit)
    return model


class UnitLinearCritic(torch.nn.Module):
    """D(x) = w . x with |w| = 1."""

    def __init__(self, dim: int, seed: int = 0):
        super().__init__()
        w = np.random.default_rng(seed).normal(size=dim)
        self.w = torch.nn.Parameter(torch.tensor(w / np.linalg.norm(w), dtype=torch.float64))

    def forward(self, x):
        return x.to(torch.float64) @ self.w


class DoubleFirstCritic(torch.nn.Module):
    """D(x) = 2 x_1."""

    def forward(self, x):
        return 2.0 * x[:, 0]
