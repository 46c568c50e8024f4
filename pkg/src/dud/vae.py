"""Variational denoiser: conv encoder/decoder with multi-scale Gaussian latents.

The encoder maps a noisy image to diagonal-Gaussian posterior parameters at
``levels`` spatial scales (level 0 at full resolution, each further level at
half the previous). Every latent level has a fixed standard-normal prior.
The decoder maps sampled latents back to a signal estimate of the input's
shape. Training minimizes::

    mean_over_pixels( -log p(x | s_hat) ) + kl_weight * mean_over_pixels( KL )

where the reconstruction term uses the explicit Gaussian noise model rather
than a generic decoder likelihood, so the decoder output is interpreted
directly as an estimate of the clean signal.

Forward passes are deterministic given parameters; all sampling goes through
an explicit ``torch.Generator``. Parameters are owned by the training loop
(single writer); concurrent read-only forward passes are safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .netutil import center_crop, pad_to_multiple, reset_conv_parameters
from .noise_model import GaussianNoiseModel

LOGVAR_CLAMP = 10.0  # numerical safety bound on posterior log-variances


class NonFiniteActivationError(RuntimeError):
    """A network produced NaN/Inf activations; the message names the layer."""


@dataclass(frozen=True)
class VAESpec:
    """Architecture description; serialized into checkpoints and configs."""

    levels: int = 2
    base_filters: int = 32
    latent_channels: tuple[int, ...] = (2, 4)
    kernel_size: int = 3

    def validate(self) -> None:
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.base_filters < 1:
            raise ValueError(f"base_filters must be >= 1, got {self.base_filters}")
        if len(self.latent_channels) != self.levels:
            raise ValueError(
                f"latent_channels must have one entry per level "
                f"({self.levels}), got {self.latent_channels}"
            )
        if any(c < 1 for c in self.latent_channels):
            raise ValueError(f"latent_channels must be >= 1, got {self.latent_channels}")
        if self.kernel_size % 2 != 1:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")

    @property
    def size_multiple(self) -> int:
        """Spatial dims must divide this; smaller inputs are reflect-padded."""
        return 2 ** (self.levels - 1)

    def to_json_dict(self) -> dict:
        return {
            "levels": self.levels,
            "base_filters": self.base_filters,
            "latent_channels": list(self.latent_channels),
            "kernel_size": self.kernel_size,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "VAESpec":
        spec = VAESpec(
            levels=int(d.get("levels", 2)),
            base_filters=int(d.get("base_filters", 32)),
            latent_channels=tuple(d.get("latent_channels", (2, 4))),
            kernel_size=int(d.get("kernel_size", 3)),
        )
        spec.validate()
        return spec


@dataclass
class VAELossBreakdown:
    """Per-pixel loss terms; tensors during training, floats after .item()."""

    reconstruction: torch.Tensor
    kl: torch.Tensor
    total: torch.Tensor


def diagonal_gaussian_kl(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """Elementwise KL( N(mu, exp(logvar)) || N(0, 1) ).

    Closed form 0.5 * (mu^2 + var - 1 - logvar); non-negative, zero exactly
    at mu=0, logvar=0.
    """
    return 0.5 * (mu * mu + torch.exp(logvar) - 1.0 - logvar)


def sample_latent(
    posterior: tuple[torch.Tensor, torch.Tensor], generator: torch.Generator | None
) -> torch.Tensor:
    """Reparameterized draw z = mu + exp(logvar/2) * eps with eps ~ N(0, I)."""
    mu, logvar = posterior
    eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype, device=mu.device)
    return mu + torch.exp(0.5 * logvar) * eps


class _ConvPair(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, k: int):
        super().__init__()
        self.c1 = nn.Conv2d(in_ch, out_ch, k, padding=k // 2)
        self.c2 = nn.Conv2d(out_ch, out_ch, k, padding=k // 2)

    def forward(self, x):
        return F.relu(self.c2(F.relu(self.c1(x))))


class DenoisingVAE(nn.Module):
    """Encoder q(z|x), standard-normal priors, decoder g(z) -> signal estimate."""

    def __init__(self, spec: VAESpec, init_generator: torch.Generator | None = None):
        super().__init__()
        spec.validate()
        self.spec = spec
        k = spec.kernel_size
        c = spec.base_filters

        self.stem = nn.Conv2d(1, c, k, padding=k // 2)
        enc_blocks, heads, downs = [], [], []
        for lvl in range(spec.levels):
            ch = c * (2**lvl)
            if lvl > 0:
                downs.append(nn.Conv2d(c * 2 ** (lvl - 1), ch, k, stride=2, padding=k // 2))
            enc_blocks.append(_ConvPair(ch, ch, k))
            heads.append(nn.Conv2d(ch, 2 * spec.latent_channels[lvl], k, padding=k // 2))
        self.enc_blocks = nn.ModuleList(enc_blocks)
        self.heads = nn.ModuleList(heads)
        self.downs = nn.ModuleList(downs)

        top_ch = c * 2 ** (spec.levels - 1)
        self.dec_top = _ConvPair(spec.latent_channels[-1], top_ch, k)
        ups, merges = [], []
        for lvl in range(spec.levels - 2, -1, -1):
            ch = c * (2**lvl)
            ups.append(nn.Conv2d(ch * 2, ch, k, padding=k // 2))
            merges.append(_ConvPair(ch + spec.latent_channels[lvl], ch, k))
        self.ups = nn.ModuleList(ups)
        self.merges = nn.ModuleList(merges)
        self.out = nn.Conv2d(c, 1, k, padding=k // 2)

        if init_generator is not None:
            reset_conv_parameters(self, init_generator)

    def encode(self, x: torch.Tensor) -> list[tuple[torch.Tensor, torch.Tensor]]:
        """Posterior (mu, logvar) per level for a (B,1,H,W) batch.

        Log-variances are clamped to [-LOGVAR_CLAMP, LOGVAR_CLAMP] before any
        exponentiation downstream.
        """
        if x.ndim != 4 or x.shape[1] != 1:
            raise ValueError(f"expected (B,1,H,W) input, got {tuple(x.shape)}")
        posteriors = []
        h = F.relu(self.stem(x))
        for lvl in range(self.spec.levels):
            if lvl > 0:
                h = F.relu(self.downs[lvl - 1](h))
            h = self.enc_blocks[lvl](h)
            p = self.heads[lvl](h)
            if not torch.isfinite(p).all():
                raise NonFiniteActivationError(
                    f"non-finite activations in encoder posterior head, level {lvl}"
                )
            mu, logvar = p.chunk(2, dim=1)
            posteriors.append((mu, logvar.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP)))
        return posteriors

    def decode(self, zs: list[torch.Tensor]) -> torch.Tensor:
        """Map sampled latents back to a signal estimate at full resolution."""
        if len(zs) != self.spec.levels:
            raise ValueError(f"expected {self.spec.levels} latent levels, got {len(zs)}")
        h = self.dec_top(zs[-1])
        for i, lvl in enumerate(range(self.spec.levels - 2, -1, -1)):
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = F.relu(self.ups[i](h))
            z = zs[lvl]
            if z.shape[-2:] != h.shape[-2:]:
                raise ValueError(
                    f"latent level {lvl} has spatial shape {tuple(z.shape[-2:])}, "
                    f"decoder expected {tuple(h.shape[-2:])}"
                )
            h = self.merges[i](torch.cat([h, z], dim=1))
        s = self.out(h)
        if not torch.isfinite(s).all():
            raise NonFiniteActivationError("non-finite activations in decoder output layer")
        return s

    def sample_denoised(self, x: torch.Tensor, generator: torch.Generator | None) -> torch.Tensor:
        """One posterior draw: encode, sample each level, decode.

        Pads inputs whose sides do not divide 2**(levels-1) and crops the
        output back, so the result always matches the input shape.
        """
        xp, size = pad_to_multiple(x, self.spec.size_multiple)
        posteriors = self.encode(xp)
        zs = [sample_latent(p, generator) for p in posteriors]
        return center_crop(self.decode(zs), size)

    def loss(
        self,
        model: GaussianNoiseModel,
        x: torch.Tensor,
        generator: torch.Generator | None,
        kl_weight: float = 1.0,
    ) -> tuple[VAELossBreakdown, torch.Tensor]:
        """Single-sample Monte-Carlo estimate of the variational objective.

        One latent draw per input. Returns the per-pixel loss breakdown and
        the sampled solutions, which the co-training loop reuses as targets
        for the direct denoiser.
        """
        xp, size = pad_to_multiple(x, self.spec.size_multiple)
        posteriors = self.encode(xp)
        zs = [sample_latent(p, generator) for p in posteriors]
        s_hat = center_crop(self.decode(zs), size)
        n = x.numel()
        recon = -model.log_likelihood(x, s_hat) / n
        kl = sum(diagonal_gaussian_kl(mu, lv).sum() for mu, lv in posteriors) / n
        total = recon + kl_weight * kl
        return VAELossBreakdown(reconstruction=recon, kl=kl, total=total), s_hat
