from typing import Any, Dict, Sequence

import torch.nn as nn


def _mlp(in_dim: int, widths: Sequence[int], out_dim: int) -> nn.Sequential:
    layers = []
    prev = in_dim
    for width in widths:
        layers += [nn.Linear(prev, width), nn.LeakyReLU(0.2)]
        prev = width
    layers.append(nn.Linear(prev, out_dim))
    return nn.Sequential(*layers)


class LatentGenerator(nn.Module):
    """Standard-normal noise -> shape latent."""

    def __init__(self, z_dim: int = 128, widths: Sequence[int] = (1024, 1024, 1024), latent_dim: int = 1024):
        super().__init__()
        self.net = _mlp(z_dim, widths, latent_dim)
        self.config = {"kind": "generator", "z_dim": z_dim, "widths": list(widths), "latent_dim": latent_dim}

    @property
    def z_dim(self) -> int:
        return self.config["z_dim"]

    @property
    def latent_dim(self) -> int:
        return self.config["latent_dim"]

    def forward(self, z):
        return self.net(z)


class LatentCritic(nn.Module):
    def __init__(self, latent_dim: int = 1024, widths: Sequence[int] = (1024, 1024, 1024)):
        super().__init__()
        self.net = _mlp(latent_dim, widths, 1)
        self.config = {"kind": "critic", "widths": list(widths), "latent_dim": latent_dim}

    def forward(self, x):
        return self.net(x).squeeze(-1)


def build_generator(config: Dict[str, Any]) -> LatentGenerator:
    return LatentGenerator(config["z_dim"], config["widths"], config["latent_dim"])


def build_critic(config: Dict[str, Any]) -> LatentCritic:
    return LatentCritic(config["latent_dim"], config["widths"])
