"""Analytic fields standing in for the part decoder."""

import numpy as np


class SphereField:
    """0.5 + (radius - |p - center|): crosses 0.5 exactly on the sphere."""

    def __init__(self, radius: float = 0.3, center=(0.5, 0.5, 0.5)):
        self.radius = radius
        self.center = np.asarray(center, dtype=np.float64)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.asarray(points, dtype=np.float64) - self.center, axis=-1)
        return np.clip(0.5 + (self.radius - r), 0.0, 1.0)


def ball_part_field(g: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Part field ignoring the code: a ball of radius 0.4 in the local frame."""
    return SphereField(0.4)(points)


def code_scaled_field(g: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Ball whose radius is read from the first code component."""
    return SphereField(0.2 + 0.3 * float(np.clip(g[0], 0.0, 1.0)))(points)
