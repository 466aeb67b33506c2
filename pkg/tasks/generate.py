from typing import List, Optional, Sequence

import numpy as np

from latentgan.networks import LatentGenerator
from latentgan.trainer import sample_latents
from models.reports import AssembledShape
from models.sequences import DecodedStep
from partae.networks import PartAutoEncoder
from seq2seq.networks import Seq2SeqAE, decode_sequence
from tasks.assemble import PartField, assemble_shape
from utils.exceptions import raise_invalid_input
from utils.logging_config import get_logger

logger = get_logger(__name__)


def generate_steps(
    generator: LatentGenerator, seq2seq: Seq2SeqAE, count: int, seed: int
) -> List[List[DecodedStep]]:
    if generator.latent_dim != seq2seq.latent_dim:
        raise_invalid_input(
            f"Generator emits {generator.latent_dim}-d latents, decoder expects {seq2seq.latent_dim}"
        )
    return [decode_sequence(h, seq2seq) for h in sample_latents(generator, count, seed)]


def generate_shapes(
    generator: LatentGenerator,
    partae: Optional[PartAutoEncoder],
    seq2seq: Seq2SeqAE,
    count: int,
    seed: int,
    resolution: int = 64,
    iso: float = 0.5,
    field: Optional[PartField] = None,
) -> List[AssembledShape]:
    """Noise -> latent -> part sequence -> assembled mesh, `count` times."""
    logger.info(f"[*] Generating {count} shapes with seed {seed}...")
    shapes = [
        assemble_shape(steps, partae, resolution, iso, field=field)
        for steps in generate_steps(generator, seq2seq, count, seed)
    ]
    degenerate = sum(s.degenerate for s in shapes)
    if degenerate:
        logger.warning(f"{degenerate}/{count} generated shapes have empty meshes")
    return shapes


def interpolate_latents(h_a: np.ndarray, h_b: np.ndarray, t_values: Sequence[float]) -> List[np.ndarray]:
    h_a = np.asarray(h_a, dtype=np.float32).reshape(-1)
    h_b = np.asarray(h_b, dtype=np.float32).reshape(-1)
    if h_a.shape != h_b.shape:
        raise_invalid_input(f"Latents differ in size: {h_a.shape} vs {h_b.shape}")
    if len(t_values) == 0:
        raise_invalid_input("No interpolation values given")
    for t in t_values:
        if not 0.0 <= t <= 1.0:
            raise_invalid_input(f"Interpolation value {t} outside [0, 1]")
    return [np.float32(1.0 - t) * h_a + np.float32(t) * h_b for t in t_values]


def interpolate(
    h_a: np.ndarray,
    h_b: np.ndarray,
    t_values: Sequence[float],
    seq2seq: Seq2SeqAE,
    partae: Optional[PartAutoEncoder] = None,
    resolution: int = 64,
    iso: float = 0.5,
    field: Optional[PartField] = None,
) -> List[AssembledShape]:
    """Decode (1 - t) h_a + t h_b for every t; each latent is decoded on its own."""
    return [
        assemble_shape(decode_sequence(h, seq2seq), partae, resolution, iso, field=field)
        for h in interpolate_latents(h_a, h_b, t_values)
    ]
