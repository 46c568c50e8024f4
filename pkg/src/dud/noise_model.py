"""Explicit Gaussian observation likelihood used inside the variational loss.

The model assumes each observed pixel is the underlying signal pixel plus
zero-mean Gaussian noise with known standard deviation ``sigma``. The class
is stateless beyond ``sigma`` and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class GaussianNoiseModel:
    """Per-pixel zero-mean Gaussian observation noise with std ``sigma``."""

    sigma: float

    def __post_init__(self) -> None:
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be > 0, got {self.sigma}")

    def rescaled(self, scale: float) -> "GaussianNoiseModel":
        """Noise model after dividing pixel values by ``scale``.

        Gaussian noise is covariant under affine rescaling, so normalizing
        images by a std estimate just divides sigma by the same factor.
        """
        if not (scale > 0):
            raise ValueError(f"scale must be > 0, got {scale}")
        return GaussianNoiseModel(sigma=self.sigma / scale)

    def log_likelihood(self, x, s):
        """Log-likelihood of observing ``x`` given signal ``s``, summed over pixels.

        Computes sum_i [ -0.5*ln(2*pi*sigma^2) - (x_i - s_i)^2 / (2*sigma^2) ].
        Works on numpy arrays (returns float) and torch tensors (returns a
        0-dim tensor through which gradients flow). Training losses divide
        by the pixel count to get a per-pixel value.
        """
        if x.shape != s.shape:
            raise ValueError(f"shape mismatch: x {tuple(x.shape)} vs s {tuple(s.shape)}")
        n = 1
        for d in x.shape:
            n *= d
        const = -0.5 * n * math.log(2.0 * math.pi * self.sigma * self.sigma)
        return const - ((x - s) ** 2).sum() / (2.0 * self.sigma * self.sigma)
