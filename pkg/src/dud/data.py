"""Synthetic datasets with known ground truth, patch sampling, and image I/O.

Images are single-channel 2-D float32 numpy arrays. Two signal families are
supported:

* ``conjugate`` -- i.i.d. per-pixel Gaussian clean signal. Together with
  additive Gaussian noise this admits a closed-form posterior mean, used as
  an exactness oracle in :mod:`dud.evaluation`.
* ``blobs`` -- randomly placed isotropic Gaussian bumps on a constant
  background, giving spatially structured, microscopy-like images.

All functions here are pure over value types: each call owns its rng, so
concurrent callers never share mutable state. Generation is a deterministic
function of :class:`DatasetSpec` (including its seed).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

ImagePlane = np.ndarray  # (H, W) float32

DUD1_MAGIC = b"DUD1"
_DUD1_HEADER = struct.Struct("<4sIII")  # magic, height, width, reserved(0)


class DudFormatError(ValueError):
    """Raised when a .dud file is corrupt, truncated, or mislabeled."""


@dataclass(frozen=True)
class ConjugateParams:
    """I.i.d. Gaussian pixel prior: each clean pixel ~ N(mean, std^2)."""

    mean: float = 0.5
    std: float = 0.2


@dataclass(frozen=True)
class BlobsParams:
    """Sum of random isotropic Gaussian bumps on a constant background."""

    count_range: tuple[int, int] = (4, 12)
    radius_range: tuple[float, float] = (2.0, 6.0)
    amplitude_range: tuple[float, float] = (0.5, 1.0)
    background: float = 0.1


@dataclass(frozen=True)
class DatasetSpec:
    """Full description of a synthetic dataset; generation is pure in this."""

    kind: str  # "conjugate" | "blobs"
    image_size: tuple[int, int]
    count_train: int
    count_val: int
    count_test: int
    noise_sigma: float
    seed: int
    signal_params: ConjugateParams | BlobsParams = field(default_factory=ConjugateParams)

    def validate(self) -> None:
        if self.kind not in ("conjugate", "blobs"):
            raise ValueError(f"kind must be 'conjugate' or 'blobs', got {self.kind!r}")
        h, w = self.image_size
        if h < 1 or w < 1:
            raise ValueError(f"image_size must be positive, got {self.image_size}")
        for name in ("count_train", "count_val", "count_test"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.kind == "conjugate":
            if not isinstance(self.signal_params, ConjugateParams):
                raise ValueError("signal_params must be ConjugateParams for kind='conjugate'")
            if self.signal_params.std <= 0:
                raise ValueError(f"signal_params.std must be > 0, got {self.signal_params.std}")
        else:
            p = self.signal_params
            if not isinstance(p, BlobsParams):
                raise ValueError("signal_params must be BlobsParams for kind='blobs'")
            if p.count_range[0] < 0 or p.count_range[1] < p.count_range[0]:
                raise ValueError(f"signal_params.count_range invalid: {p.count_range}")
            if p.radius_range[0] <= 0 or p.radius_range[1] < p.radius_range[0]:
                raise ValueError(f"signal_params.radius_range invalid: {p.radius_range}")
            if p.amplitude_range[1] < p.amplitude_range[0]:
                raise ValueError(f"signal_params.amplitude_range invalid: {p.amplitude_range}")

    def to_json_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "image_size": list(self.image_size),
            "count_train": self.count_train,
            "count_val": self.count_val,
            "count_test": self.count_test,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }
        if isinstance(self.signal_params, ConjugateParams):
            d["signal_params"] = {"mean": self.signal_params.mean, "std": self.signal_params.std}
        else:
            p = self.signal_params
            d["signal_params"] = {
                "count_range": list(p.count_range),
                "radius_range": list(p.radius_range),
                "amplitude_range": list(p.amplitude_range),
                "background": p.background,
            }
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "DatasetSpec":
        kind = d.get("kind")
        sp = d.get("signal_params", {})
        if kind == "conjugate":
            params: ConjugateParams | BlobsParams = ConjugateParams(
                mean=float(sp.get("mean", 0.5)), std=float(sp.get("std", 0.2))
            )
        elif kind == "blobs":
            params = BlobsParams(
                count_range=tuple(sp.get("count_range", (4, 12))),
                radius_range=tuple(sp.get("radius_range", (2.0, 6.0))),
                amplitude_range=tuple(sp.get("amplitude_range", (0.5, 1.0))),
                background=float(sp.get("background", 0.1)),
            )
        else:
            raise ValueError(f"kind must be 'conjugate' or 'blobs', got {kind!r}")
        spec = DatasetSpec(
            kind=kind,
            image_size=(int(d["image_size"][0]), int(d["image_size"][1])),
            count_train=int(d["count_train"]),
            count_val=int(d["count_val"]),
            count_test=int(d["count_test"]),
            noise_sigma=float(d["noise_sigma"]),
            seed=int(d["seed"]),
            signal_params=params,
        )
        spec.validate()
        return spec


Pair = tuple[ImagePlane, ImagePlane]  # (clean, noisy)


@dataclass
class DatasetSplits:
    train: list[Pair]
    val: list[Pair]
    test: list[Pair]

    def noisy(self, split: str) -> list[ImagePlane]:
        return [n for _, n in getattr(self, split)]

    def clean(self, split: str) -> list[ImagePlane]:
        return [c for c, _ in getattr(self, split)]


def _conjugate_image(h: int, w: int, p: ConjugateParams, rng: np.random.Generator) -> ImagePlane:
    return rng.normal(p.mean, p.std, size=(h, w)).astype(np.float32)


def _blobs_image(h: int, w: int, p: BlobsParams, rng: np.random.Generator) -> ImagePlane:
    img = np.full((h, w), p.background, dtype=np.float64)
    yy = np.arange(h, dtype=np.float64)[:, None]
    xx = np.arange(w, dtype=np.float64)[None, :]
    count = int(rng.integers(p.count_range[0], p.count_range[1] + 1))
    for _ in range(count):
        cy = rng.uniform(0.0, h)
        cx = rng.uniform(0.0, w)
        r = rng.uniform(*p.radius_range)
        amp = rng.uniform(*p.amplitude_range)
        img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * r * r))
    return img.astype(np.float32)


def _make_pairs(spec: DatasetSpec, count: int, rng: np.random.Generator) -> list[Pair]:
    h, w = spec.image_size
    pairs: list[Pair] = []
    for _ in range(count):
        if spec.kind == "conjugate":
            clean = _conjugate_image(h, w, spec.signal_params, rng)  # type: ignore[arg-type]
        else:
            clean = _blobs_image(h, w, spec.signal_params, rng)  # type: ignore[arg-type]
        if spec.noise_sigma > 0:
            noisy = (clean + rng.normal(0.0, spec.noise_sigma, size=(h, w))).astype(np.float32)
        else:
            noisy = clean.copy()
        pairs.append((clean, noisy))
    return pairs


def generate_dataset(spec: DatasetSpec) -> DatasetSplits:
    """Generate disjoint train/val/test splits of (clean, noisy) pairs.

    One seeded stream drives everything, drawn in a fixed order (train, then
    val, then test), so identical specs regenerate bit-identical datasets.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    train = _make_pairs(spec, spec.count_train, rng)
    val = _make_pairs(spec, spec.count_val, rng)
    test = _make_pairs(spec, spec.count_test, rng)
    return DatasetSplits(train=train, val=val, test=test)


@dataclass
class PatchBatch:
    """Batch of square patches cut from source images at random positions."""

    patches: np.ndarray  # (B, patch_size, patch_size) float32
    image_indices: np.ndarray  # (B,)
    corners: np.ndarray  # (B, 2) top-left (row, col)


def sample_patch_batch(
    images: Sequence[ImagePlane],
    batch_size: int,
    patch_size: int,
    rng: np.random.Generator,
) -> PatchBatch:
    """Cut ``batch_size`` patches at uniformly random top-left corners.

    Every patch lies fully inside its source image; ``rng`` is advanced.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if patch_size < 1:
        raise ValueError(f"patch_size must be >= 1, got {patch_size}")
    for i, img in enumerate(images):
        if img.shape[0] < patch_size or img.shape[1] < patch_size:
            raise ValueError(
                f"image {i} of shape {img.shape} is smaller than patch_size {patch_size}"
            )
    patches = np.empty((batch_size, patch_size, patch_size), dtype=np.float32)
    idx = np.empty(batch_size, dtype=np.int64)
    corners = np.empty((batch_size, 2), dtype=np.int64)
    for b in range(batch_size):
        i = int(rng.integers(0, len(images)))
        img = images[i]
        top = int(rng.integers(0, img.shape[0] - patch_size + 1))
        left = int(rng.integers(0, img.shape[1] - patch_size + 1))
        patches[b] = img[top : top + patch_size, left : left + patch_size]
        idx[b] = i
        corners[b] = (top, left)
    return PatchBatch(patches=patches, image_indices=idx, corners=corners)


def write_image(path: str | Path, image: ImagePlane) -> None:
    """Write a single-channel float image in the DUD1 container (bit-exact)."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite pixel values")
    header = _DUD1_HEADER.pack(DUD1_MAGIC, arr.shape[0], arr.shape[1], 0)
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr.tobytes(order="C"))


def read_image(path: str | Path) -> ImagePlane:
    """Read a DUD1 file back into a float32 array; round-trip is bit-exact."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _DUD1_HEADER.size:
        raise DudFormatError(f"{path}: file shorter than the 16-byte header")
    magic, height, width, reserved = _DUD1_HEADER.unpack_from(raw)
    if magic != DUD1_MAGIC:
        raise DudFormatError(f"{path}: bad magic {magic!r}, expected {DUD1_MAGIC!r}")
    if reserved != 0:
        raise DudFormatError(f"{path}: reserved header bytes are nonzero")
    if height < 1 or width < 1:
        raise DudFormatError(f"{path}: invalid dimensions {height}x{width}")
    expected = _DUD1_HEADER.size + 4 * height * width
    if len(raw) != expected:
        raise DudFormatError(
            f"{path}: payload size mismatch, header says {height}x{width} "
            f"({expected} bytes total) but file has {len(raw)} bytes"
        )
    pixels = np.frombuffer(raw, dtype="<f4", offset=_DUD1_HEADER.size).reshape(height, width)
    if not np.isfinite(pixels).all():
        raise DudFormatError(f"{path}: payload contains non-finite pixel values")
    return pixels.astype(np.float32, copy=True)


def save_dataset(dirpath: str | Path, spec: DatasetSpec, splits: DatasetSplits) -> None:
    """Write the on-disk layout: clean/NNNN.dud, noisy/NNNN.dud, spec.json.

    Images are numbered globally in train, val, test order; the counts in
    spec.json recover the split boundaries.
    """
    root = Path(dirpath)
    (root / "clean").mkdir(parents=True, exist_ok=True)
    (root / "noisy").mkdir(parents=True, exist_ok=True)
    n = 0
    for split in (splits.train, splits.val, splits.test):
        for clean, noisy in split:
            write_image(root / "clean" / f"{n:04d}.dud", clean)
            write_image(root / "noisy" / f"{n:04d}.dud", noisy)
            n += 1
    with open(root / "spec.json", "w") as f:
        json.dump(spec.to_json_dict(), f, indent=2)
        f.write("\n")


def load_dataset(dirpath: str | Path) -> tuple[DatasetSpec, DatasetSplits]:
    """Read back a dataset directory written by :func:`save_dataset`."""
    root = Path(dirpath)
    spec_path = root / "spec.json"
    if not spec_path.exists():
        raise FileNotFoundError(f"{spec_path} not found; not a dataset directory")
    with open(spec_path) as f:
        spec = DatasetSpec.from_json_dict(json.load(f))
    counts = (spec.count_train, spec.count_val, spec.count_test)
    pairs: list[Pair] = []
    for n in range(sum(counts)):
        clean = read_image(root / "clean" / f"{n:04d}.dud")
        noisy = read_image(root / "noisy" / f"{n:04d}.dud")
        pairs.append((clean, noisy))
    a, b = counts[0], counts[0] + counts[1]
    return spec, DatasetSplits(train=pairs[:a], val=pairs[a:b], test=pairs[b:])
