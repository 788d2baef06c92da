"""Toy data generators for the low-dimensional experiments."""

from __future__ import annotations

import numpy as np

__all__ = ["two_moons"]


def two_moons(n: int, rng: np.random.Generator) -> np.ndarray:
    """n points from two interleaved half-circles of radius 1, offset 0.5.

    The moon assignment is random per point (label-free mixing) and the base
    curves are noise-free; corruption is applied separately by a channel.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    upper = rng.random(n) < 0.5
    theta = rng.uniform(0.0, np.pi, size=n)
    x = np.where(upper, np.cos(theta), 1.0 - np.cos(theta))
    y = np.where(upper, np.sin(theta), 0.5 - np.sin(theta))
    return np.column_stack([x, y])
