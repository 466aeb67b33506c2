from typing import List, Sequence

import numpy as np

from models.sequences import DecodedStep, StepVector
from seq2seq.networks import Seq2SeqAE, decode_sequence, encode_sequence
from utils.exceptions import raise_invalid_input


# stop probabilities stay strictly inside (0, 1)
STOP_EPS = 1e-6


def _as_fed(steps: Sequence[StepVector]) -> List[StepVector]:
    # the count one-hot always describes the parts actually fed in
    return [step.with_count(len(steps)) for step in steps]


def complete_shape(partial_steps: Sequence[StepVector], model: Seq2SeqAE) -> List[DecodedStep]:
    """Decode a full sequence, at least as long as the partial input."""
    if not partial_steps:
        raise_invalid_input("Completion needs at least one input part")
    if len(partial_steps) > model.k_max:
        raise_invalid_input(f"{len(partial_steps)} input parts exceed K_max={model.k_max}")
    h_z = encode_sequence(_as_fed(partial_steps), model)
    return decode_sequence(h_z, model, min_steps=len(partial_steps))


def denoise_order(scrambled_steps: Sequence[StepVector], model: Seq2SeqAE) -> List[DecodedStep]:
    """
    Re-emit a scrambled part sequence in canonical order.

    Output length always equals input length. A single part has only one
    order: its geometry and box come back unchanged with the model's stop
    probability for that step.
    """
    if not scrambled_steps:
        raise_invalid_input("Denoising needs at least one input part")
    k = len(scrambled_steps)
    if k > model.k_max:
        raise_invalid_input(f"{k} input parts exceed K_max={model.k_max}")
    h_z = encode_sequence(_as_fed(scrambled_steps), model)
    if k == 1:
        only = scrambled_steps[0]
        (decoded,) = decode_sequence(h_z, model, max_steps=1, min_steps=1)
        return [DecodedStep(g=only.g, b=only.b, s=np.clip(decoded.s, STOP_EPS, 1.0 - STOP_EPS))]
    return decode_sequence(h_z, model, max_steps=k, min_steps=k)
