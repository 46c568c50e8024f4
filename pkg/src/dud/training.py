"""Co-training loop: one variational update and one direct update per step.

Per step, in order: (1) the VAE encodes a noisy batch and samples candidate
solutions; (2) the VAE parameters are updated on the variational loss;
(3) the direct denoiser processes the same batch; (4) its parameters are
updated against the step-1 samples, detached, so no gradient ever flows from
the direct loss into the VAE. The two models have independent Adamax
optimizers with independent plateau-based learning-rate schedules.

The loop is single-writer over all parameters. Every random draw flows from
the run seed through explicit generators (numpy for patch sampling, torch
for latent noise), so identical configs reproduce identical metric logs and
a checkpoint resume continues bit-identically.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .data import DatasetSource_unused  # placeholder, removed below
