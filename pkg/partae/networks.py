from typing import Any, Dict, Optional, Sequence

import numpy as np
import torch
import torch.nn as nn

from models.geometry import VoxelGrid
from utils.exceptions import raise_invalid_input

INPUT_RESOLUTION = 64
SKIP_LAYERS = 4
LEAKY_SLOPE = 0.02


class PartEncoder(nn.Module):
    """
    64^3 occupancy -> code in [0, 1]^code_dim.

    Four stride-2 conv stages (batch norm + leaky ReLU) take 64^3 down to 4^3,
    then a 4^3 valid conv with sigmoid produces the code.
    """

    def __init__(self, channels: Sequence[int] = (32, 64, 128, 256), code_dim: int = 128):
        super().__init__()
        layers = []
        in_ch = 1
        for out_ch in channels:
            layers += [
                nn.Conv3d(in_ch, out_ch, kernel_size=4, stride=2, padding=1, bias=False),
                nn.BatchNorm3d(out_ch),
                nn.LeakyReLU(LEAKY_SLOPE),
            ]
            in_ch = out_ch
        spatial = INPUT_RESOLUTION // 2 ** len(channels)
        layers += [nn.Conv3d(in_ch, code_dim, kernel_size=spatial, stride=1, padding=0), nn.Sigmoid()]
        self.net = nn.Sequential(*layers)
        self.code_dim = code_dim

    def forward(self, volumes: torch.Tensor) -> torch.Tensor:
        return self.net(volumes).flatten(1)


class ImplicitDecoder(nn.Module):
    """
    (code, point) -> inside-probability.

    The code/point input is concatenated onto the outputs of the first four
    hidden layers, which also carry dropout.
    """

    def __init__(
        self,
        code_dim: int = 128,
        widths: Sequence[int] = (2048, 1024, 512, 256, 128),
        dropout: float = 0.4,
    ):
        super().__init__()
        in_dim = code_dim + 3
        self.layers = nn.ModuleList()
        self.skips = []
        prev = in_dim
        for i, width in enumerate(widths):
            self.layers.append(nn.Linear(prev, width))
            skip = i < min(SKIP_LAYERS, len(widths) - 1)
            self.skips.append(skip)
            prev = width + (in_dim if skip else 0)
        self.out = nn.Linear(prev, 1)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)
        self.dropout = nn.Dropout(dropout)
        self.code_dim = code_dim

    def forward(self, codes: torch.Tensor, points: torch.Tensor) -> torch.Tensor:
        """
        Args:
            codes: (B, code_dim)
            points: (B, N, 3)

        Returns:
            (B, N) values in [0, 1]
        """
        x0 = torch.cat([codes[:, None, :].expand(-1, points.shape[1], -1), points], dim=-1)
        x = x0
        for layer, skip in zip(self.layers, self.skips):
            x = self.act(layer(x))
            if skip:
                x = torch.cat([self.dropout(x), x0], dim=-1)
        return torch.sigmoid(self.out(x)).squeeze(-1)


class PartAutoEncoder(nn.Module):
    def __init__(
        self,
        code_dim: int = 128,
        encoder_channels: Sequence[int] = (32, 64, 128, 256),
        decoder_widths: Sequence[int] = (2048, 1024, 512, 256, 128),
        dropout: float = 0.4,
    ):
        super().__init__()
        self.encoder = PartEncoder(encoder_channels, code_dim)
        self.decoder = ImplicitDecoder(code_dim, decoder_widths, dropout)
        self.config = {
            "kind": "partae",
            "code_dim": code_dim,
            "encoder_channels": list(encoder_channels),
            "decoder_widths": list(decoder_widths),
            "dropout": dropout,
        }

    @property
    def code_dim(self) -> int:
        return self.config["code_dim"]

    def encode(self, volumes: torch.Tensor) -> torch.Tensor:
        return self.encoder(volumes)

    def decode(self, codes: torch.Tensor, points: torch.Tensor) -> torch.Tensor:
        return self.decoder(codes, points)

    def forward(self, volumes: torch.Tensor, points: torch.Tensor) -> torch.Tensor:
        return self.decode(self.encode(volumes), points)


def build_part_ae(config: Dict[str, Any]) -> PartAutoEncoder:
    return PartAutoEncoder(
        code_dim=config["code_dim"],
        encoder_channels=config["encoder_channels"],
        decoder_widths=config["decoder_widths"],
        dropout=config["dropout"],
    )


def _device(model: nn.Module) -> torch.device:
    return next(model.parameters()).device


def volume_tensor(volume: VoxelGrid) -> torch.Tensor:
    return torch.from_numpy(volume.occupancy.astype(np.float32))[None, None]


@torch.no_grad()
def encode_part(volume: VoxelGrid, model: PartAutoEncoder) -> np.ndarray:
    """Code of one 64^3 part volume, computed in evaluation mode."""
    if volume.resolution != INPUT_RESOLUTION:
        raise_invalid_input(
            f"Part encoder expects {INPUT_RESOLUTION}^3 volumes, got {volume.resolution}^3"
        )
    model.eval()
    code = model.encode(volume_tensor(volume).to(_device(model)))
    return code[0].cpu().numpy()


@torch.no_grad()
def decode_points(
    g: np.ndarray, points: np.ndarray, model: PartAutoEncoder, chunk: int = 65536
) -> np.ndarray:
    """Field values for many points of one part, evaluated in chunks."""
    model.eval()
    device = _device(model)
    code = torch.as_tensor(np.asarray(g, dtype=np.float32), device=device)[None]
    points = np.asarray(points, dtype=np.float32).reshape(-1, 3)
    out = np.empty(len(points), dtype=np.float32)
    for start in range(0, len(points), chunk):
        batch = torch.from_numpy(points[start : start + chunk]).to(device)[None]
        out[start : start + chunk] = model.decode(code, batch)[0].cpu().numpy()
    return out


def decode_point(g: np.ndarray, p, model: PartAutoEncoder) -> float:
    p = np.asarray(p, dtype=np.float64).reshape(3)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise_invalid_input(f"Query point outside the unit cube: {p}")
    return float(decode_points(g, p[None], model)[0])


def freeze(model: nn.Module) -> nn.Module:
    model.eval()
    for param in model.parameters():
        param.requires_grad_(False)
    return model


def model_device(model: Optional[nn.Module]) -> torch.device:
    return _device(model) if model is not None else torch.device("cpu")
