"""Shared helpers for the conv networks: seeded init and pad/crop plumbing."""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def reset_conv_parameters(module: nn.Module, generator: torch.Generator) -> None:
    """Re-draw all Conv2d weights/biases from an explicit generator.

    Mirrors the default kaiming-uniform bound (1/sqrt(fan_in)) but routes
    every draw through ``generator`` so model construction consumes no
    global RNG state.
    """
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
            bound = 1.0 / math.sqrt(fan_in)
            with torch.no_grad():
                m.weight.uniform_(-bound, bound, generator=generator)
                if m.bias is not None:
                    m.bias.uniform_(-bound, bound, generator=generator)


def pad_to_multiple(x: torch.Tensor, multiple: int) -> tuple[torch.Tensor, tuple[int, int]]:
    """Reflect-pad (N,C,H,W) symmetrically so H and W divide ``multiple``.

    Returns the padded tensor and the original (H, W) for cropping back.
    Reflection requires every side pad to be smaller than the dimension
    itself; callers enforce their own minimum-size contracts.
    """
    h, w = x.shape[-2], x.shape[-1]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return x, (h, w)
    top, bottom = ph // 2, ph - ph // 2
    left, right = pw // 2, pw - pw // 2
    return F.pad(x, (left, right, top, bottom), mode="reflect"), (h, w)


def center_crop(x: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    """Crop (N,C,H,W) back to the centered original size."""
    h, w = size
    if x.shape[-2] == h and x.shape[-1] == w:
        return x
    top = (x.shape[-2] - h) // 2
    left = (x.shape[-1] - w) // 2
    return x[..., top : top + h, left : left + w]
