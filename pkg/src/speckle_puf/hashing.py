"""Gabor-filter hashing of speckle images into 256-bit keys, and
fractional-Hamming-distance statistics over key populations.

Each key bit compares the real part of one complex Gabor response, at one
sampled pixel, against that filter's median response over the sampling
region (strictly-greater wins; ties give 0).  Median thresholding keeps the
per-bit bias near 1/2 regardless of illumination level.  Sampling is
restricted to a central disk matching the illuminated core: responses in
the dark cladding would be noise-dominated and would bias the keys.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal

from .device import SpeckleImage
from .errors import InsufficientDataError, InvalidConfigError
from .seeding import derive_rng

FHD_HISTOGRAM_BINS = 64


@dataclass(frozen=True)
class HashConfig:
    """Gabor filter bank geometry plus the seeded (pixel, filter) sample set."""

    gabor_orientations: int = 4
    gabor_wavelengths_px: tuple[float, ...] = (8.0, 16.0)
    n_bits: int = 256
    hash_seed: int = 0
    grid_size: int = 128
    sample_radius_frac: float = 0.30  # sampling/threshold disk radius, fraction of grid

    def __post_init__(self):
        if self.gabor_orientations < 1 or len(self.gabor_wavelengths_px) < 1:
            raise InvalidConfigError("need at least one orientation and one scale")
        if self.n_bits < 1:
            raise InvalidConfigError("n_bits must be positive")
        if not 0.0 < self.sample_radius_frac <= 0.5:
            raise InvalidConfigError("sample_radius_frac must lie in (0, 0.5]")

    @property
    def n_filters(self) -> int:
        return self.gabor_orientations * len(self.gabor_wavelengths_px)


@dataclass(frozen=True)
class BinaryKey:
    """Extracted 256-bit key."""

    bits: np.ndarray  # (256,) uint8 of 0/1

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if bits.shape != (256,) or bits.max(initial=0) > 1:
            raise ValueError("a key is exactly 256 bits of 0/1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def to_hex(self) -> str:
        return np.packbits(self.bits).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str) -> "BinaryKey":
        raw = bytes.fromhex(text.strip())
        if len(raw) != 32:
            raise ValueError("hex key must encode exactly 32 bytes")
        return cls(np.unpackbits(np.frombuffer(raw, dtype=np.uint8)))


@dataclass(frozen=True)
class FhdStats:
    """Summary of a set of pairwise fractional Hamming distances."""

    mean: float
    std: float
    min: float
    max: float
    histogram: np.ndarray  # counts in 64 equal bins over [0, 1]
    pair_count: int


@lru_cache(maxsize=8)
def gabor_kernels(config: HashConfig) -> tuple[np.ndarray, ...]:
    """Complex Gabor kernels (orientation-major order), DC-free real part."""
    kernels = []
    for wavelength in config.gabor_wavelengths_px:
        sigma = 0.56 * wavelength
        half = int(np.ceil(3.0 * sigma))
        y, x = np.mgrid[-half : half + 1, -half : half + 1].astype(float)
        for k in range(config.gabor_orientations):
            theta = np.pi * k / config.gabor_orientations
            xr = x * np.cos(theta) + y * np.sin(theta)
            yr = -x * np.sin(theta) + y * np.cos(theta)
            envelope = np.exp(-(xr**2 + yr**2) / (2.0 * sigma**2))
            kernel = envelope * np.exp(1j * 2.0 * np.pi * xr / wavelength)
            kernel = kernel - envelope * (kernel.real.sum() / envelope.sum())
            kernels.append(kernel)
    return tuple(kernels)


@lru_cache(maxsize=8)
def _region_mask(config: HashConfig) -> np.ndarray:
    g = config.grid_size
    c = (g - 1) / 2.0
    yy, xx = np.mgrid[0:g, 0:g]
    mask = (xx - c) ** 2 + (yy - c) ** 2 <= (config.sample_radius_frac * g) ** 2
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=8)
def sample_positions(config: HashConfig) -> tuple[np.ndarray, np.ndarray]:
    """Distinct pixel positions (n, 2 as row, col) and a filter index per bit."""
    rng = derive_rng(config.hash_seed, "hash-positions")
    g = config.grid_size
    c = (g - 1) / 2.0
    radius = config.sample_radius_frac * g
    seen: set[tuple[int, int]] = set()
    rows, cols = [], []
    while len(rows) < config.n_bits:
        r, q = rng.integers(0, g, size=2)
        if (r - c) ** 2 + (q - c) ** 2 > radius**2 or (r, q) in seen:
            continue
        seen.add((int(r), int(q)))
        rows.append(int(r))
        cols.append(int(q))
    positions = np.column_stack([rows, cols])
    filters = rng.integers(0, config.n_filters, size=config.n_bits)
    positions.setflags(write=False)
    filters.setflags(write=False)
    return positions, filters


def gabor_responses(image: np.ndarray, config: HashConfig) -> np.ndarray:
    """Real parts of the complex Gabor responses, shape (n_filters, G, G)."""
    out = np.empty((config.n_filters, *image.shape))
    for i, kernel in enumerate(gabor_kernels(config)):
        # real image: Re(conv(I, k)) == conv(I, Re k); zero-padded boundaries
        out[i] = signal.fftconvolve(image, kernel.real, mode="same")
    return out


def gabor_hash(image: SpeckleImage | np.ndarray, config: HashConfig) -> BinaryKey:
    """Hash one speckle image into a key.

    bit = 1 iff the sampled response strictly exceeds that filter's median
    response over the sampling disk (a featureless image yields all zeros).
    """
    pixels = image.intensities if isinstance(image, SpeckleImage) else np.asarray(image)
    if pixels.shape != (config.grid_size, config.grid_size):
        raise InvalidConfigError(
            f"image shape {pixels.shape} != configured grid {config.grid_size}"
        )
    positions, filters = sample_positions(config)
    if positions[:, 0].max() >= pixels.shape[0] or positions[:, 1].max() >= pixels.shape[1]:
        raise InvalidConfigError("sample positions out of image bounds")
    responses = gabor_responses(pixels, config)
    region = _region_mask(config)
    medians = np.median(responses[:, region], axis=1)
    sampled = responses[filters, positions[:, 0], positions[:, 1]]
    return BinaryKey((sampled > medians[filters]).astype(np.uint8))


def fhd(a: BinaryKey, b: BinaryKey) -> float:
    """Fractional Hamming distance: popcount(a xor b) / 256."""
    if a.bits.shape != b.bits.shape:
        raise ValueError("keys must have equal length")
    return float(np.count_nonzero(a.bits != b.bits)) / a.bits.size


def _pairwise_fhd_within(keys: list[BinaryKey]) -> np.ndarray:
    mat = np.array([k.bits for k in keys])
    n = len(keys)
    iu = np.triu_indices(n, k=1)
    diff = (mat[:, None, :] != mat[None, :, :]).mean(axis=2)
    return diff[iu]


def _pairwise_fhd_between(groups: list[list[BinaryKey]]) -> np.ndarray:
    mats = [np.array([k.bits for k in g]) for g in groups]
    vals = []
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            diff = (mats[i][:, None, :] != mats[j][None, :, :]).mean(axis=2)
            vals.append(diff.ravel())
    return np.concatenate(vals) if vals else np.array([])


def fhd_values(groups, mode: str) -> np.ndarray:
    """All pairwise FHDs for a grouping.

    "intra": all pairs within a single group (many noisy re-measurements).
    "inter_I": pairs across groups of one device (wavelength-stepped).
    "inter_II": pairs across groups of distinct devices, same challenge.
    """
    groups = [list(g) for g in groups]
    if mode == "intra":
        if len(groups) != 1:
            raise ValueError("intra mode expects exactly one group")
        if len(groups[0]) < 2:
            raise InsufficientDataError("need at least 2 keys for intra statistics")
        return _pairwise_fhd_within(groups[0])
    if mode in ("inter_I", "inter_II"):
        if len(groups) < 2:
            raise InsufficientDataError("need at least 2 groups for inter statistics")
        return _pairwise_fhd_between(groups)
    raise ValueError(f"unknown mode {mode!r}")


def stats_from_values(values: np.ndarray) -> FhdStats:
    if values.size == 0:
        raise InsufficientDataError("no key pairs to summarize")
    hist, _ = np.histogram(values, bins=FHD_HISTOGRAM_BINS, range=(0.0, 1.0))
    return FhdStats(
        mean=float(values.mean()),
        std=float(values.std()),
        min=float(values.min()),
        max=float(values.max()),
        histogram=hist,
        pair_count=int(values.size),
    )


def class_stats(groups, mode: str) -> FhdStats:
    """FhdStats over the designated grouping (see ``fhd_values``)."""
    return stats_from_values(fhd_values(groups, mode))


def overlap_margin(intra: FhdStats, inter: FhdStats) -> float:
    """min(inter) - max(intra); positive means zero overlap between classes."""
    return inter.min - intra.max
