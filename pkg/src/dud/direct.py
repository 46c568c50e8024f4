"""Deterministic direct denoiser: a UNet trained on sampled solutions.

Trained with L1 it converges to the per-pixel median of its target
distribution (the MMAE estimate); with L2, to the mean (the MMSE estimate).
The forward pass contains no sampling or dropout, so it is bit-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .netutil import center_crop, pad_to_multiple, reset_conv_parameters
from .vae import NonFiniteActivationError

LOSS_KINDS = ("L1", "L2")


@dataclass(frozen=True)
class UNetSpec:
    """Depth = number of stride-2 downsamplings; filters double per level."""

    depth: int = 4
    base_filters: int = 16
    kernel_size: int = 3

    def validate(self) -> None:
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.base_filters < 1:
            raise ValueError(f"base_filters must be >= 1, got {self.base_filters}")
        if self.kernel_size % 2 != 1:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")

    @property
    def size_multiple(self) -> int:
        return 2**self.depth

    def to_json_dict(self) -> dict:
        return {"depth": self.depth, "base_filters": self.base_filters, "kernel_size": self.kernel_size}

    @staticmethod
    def from_json_dict(d: dict) -> "UNetSpec":
        spec = UNetSpec(
            depth=int(d.get("depth", 4)),
            base_filters=int(d.get("base_filters", 16)),
            kernel_size=int(d.get("kernel_size", 3)),
        )
        spec.validate()
        return spec


class ResidualBlock(nn.Module):
    # two convs with ReLU; 1x1 projection when the channel count changes
    def __init__(self, in_ch: int, out_ch: int, k: int):
        super().__init__()
        self.c1 = nn.Conv2d(in_ch, out_ch, k, padding=k // 2)
        self.c2 = nn.Conv2d(out_ch, out_ch, k, padding=k // 2)
        self.proj = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else None

    def forward(self, x):
        h = self.c2(F.relu(self.c1(x)))
        skip = x if self.proj is None else self.proj(x)
        return F.relu(skip + h)


class DirectDenoiser(nn.Module):
    """UNet with residual blocks, stride-2 downsampling, nearest-neighbor
    upsampling plus one conv, and concatenation skip merges."""

    def __init__(
        self,
        spec: UNetSpec,
        loss_kind: str = "L2",
        init_generator: torch.Generator | None = None,
    ):
        super().__init__()
        spec.validate()
        if loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {loss_kind!r}")
        self.spec = spec
        self.loss_kind = loss_kind
        k, c = spec.kernel_size, spec.base_filters

        self.stem = nn.Conv2d(1, c, k, padding=k // 2)
        self.enc = nn.ModuleList(
            [ResidualBlock(c * 2**i, c * 2**i, k) for i in range(spec.depth)]
        )
        self.downs = nn.ModuleList(
            [nn.Conv2d(c * 2**i, c * 2 ** (i + 1), k, stride=2, padding=k // 2) for i in range(spec.depth)]
        )
        bottom = c * 2**spec.depth
        self.bottleneck = ResidualBlock(bottom, bottom, k)
        self.ups = nn.ModuleList(
            [nn.Conv2d(c * 2 ** (i + 1), c * 2**i, k, padding=k // 2) for i in reversed(range(spec.depth))]
        )
        self.merges = nn.ModuleList(
            [ResidualBlock(c * 2 ** (i + 1), c * 2**i, k) for i in reversed(range(spec.depth))]
        )
        self.out = nn.Conv2d(c, 1, k, padding=k // 2)

        if init_generator is not None:
            reset_conv_parameters(self, init_generator)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 1:
            raise ValueError(f"expected (B,1,H,W) input, got {tuple(x.shape)}")
        m = self.spec.size_multiple
        if min(x.shape[-2], x.shape[-1]) < m:
            raise ValueError(
                f"input spatial size {tuple(x.shape[-2:])} is smaller than 2^depth = {m}"
            )
        xp, size = pad_to_multiple(x, m)

        h = F.relu(self.stem(xp))
        skips = []
        for i in range(self.spec.depth):
            h = self.enc[i](h)
            skips.append(h)
            h = F.relu(self.downs[i](h))
        h = self.bottleneck(h)
        for i in range(self.spec.depth):
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = F.relu(self.ups[i](h))
            h = self.merges[i](torch.cat([h, skips[-1 - i]], dim=1))
        y = self.out(h)

        if not torch.isfinite(y).all():
            raise NonFiniteActivationError("non-finite activations in direct denoiser output")
        return center_crop(y, size)


def l1_loss(y, s_hat):
    """Mean absolute error over all pixels and batch entries."""
    if y.shape != s_hat.shape:
        raise ValueError(f"shape mismatch: {tuple(y.shape)} vs {tuple(s_hat.shape)}")
    return abs(y - s_hat).mean()


def l2_loss(y, s_hat):
    """Mean squared error over all pixels and batch entries."""
    if y.shape != s_hat.shape:
        raise ValueError(f"shape mismatch: {tuple(y.shape)} vs {tuple(s_hat.shape)}")
    return ((y - s_hat) ** 2).mean()


def loss_for_kind(kind: str):
    if kind == "L1":
        return l1_loss
    if kind == "L2":
        return l2_loss
    raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {kind!r}")
