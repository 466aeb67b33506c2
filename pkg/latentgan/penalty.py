from typing import Callable, Optional, Tuple

import torch

from utils.exceptions import raise_invalid_input
from utils.utils import torch_generator

Critic = Callable[[torch.Tensor], torch.Tensor]


def gradient_penalty(
    critic: Critic,
    real: torch.Tensor,
    fake: torch.Tensor,
    seed: Optional[int] = None,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """
    E[(|grad D(x_hat)|_2 - 1)^2] at x_hat = u * real + (1 - u) * fake.

    u ~ U(0, 1) is drawn once per sample, from `generator` when given, else
    from a generator seeded with `seed`, else from the global stream.
    """
    if real.shape != fake.shape or real.dim() != 2:
        raise_invalid_input(
            f"real and fake must be matching (B, D) batches, got {tuple(real.shape)} and {tuple(fake.shape)}"
        )
    if real.shape[0] < 1:
        raise_invalid_input("Gradient penalty needs at least one sample")
    if generator is None and seed is not None:
        generator = torch_generator(seed)
    u = torch.rand(real.shape[0], 1, generator=generator, dtype=real.dtype).to(real.device)
    x_hat = (u * real + (1.0 - u) * fake).detach().requires_grad_(True)
    scores = critic(x_hat)
    (grads,) = torch.autograd.grad(scores.sum(), x_hat, create_graph=True)
    return ((grads.norm(2, dim=1) - 1.0) ** 2).mean()


def critic_loss(
    critic: Critic,
    real: torch.Tensor,
    fake: torch.Tensor,
    penalty_weight: float,
    generator: Optional[torch.Generator] = None,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Returns:
        (loss, Wasserstein estimate D(real) - D(fake), weighted penalty term)
    """
    wasserstein = critic(real).mean() - critic(fake).mean()
    penalty = penalty_weight * gradient_penalty(critic, real, fake, generator=generator)
    return -wasserstein + penalty, wasserstein, penalty
