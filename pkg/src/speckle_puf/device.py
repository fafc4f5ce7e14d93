"""PUF token model: propagation segments alternating with random unitary
mode-mixing planes, plus a rough input facet and a square-law detector.

A device is fully determined by (fiber spec, defect count, coupling
strength, total length, device seed): defect positions, the Hermitian
generators of the mixing planes, and the facet mask are all drawn from one
RNG stream derived from the device seed, so a device can be reconstructed
from its parameters alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateExcitationError, InvalidSpecError
from .fiber import FiberSpec, ModeFamily, default_fiber
from .seeding import derive_rng

UM_PER_MM = 1000.0

DEFAULT_TOTAL_LENGTH_MM = 4.0
DEFAULT_DEFECT_COUNT = 20
DEFAULT_COUPLING = 0.5
DEFAULT_MASK_ROUGHNESS = 0.3


@dataclass(frozen=True)
class Challenge:
    """Stimulus: a wavelength plus an input-facet field (None = plane wave)."""

    wavelength_nm: float = 1540.0
    illumination: np.ndarray | None = None


@dataclass(frozen=True)
class DetectorSpec:
    """Square-law camera: grid size, additive-noise SNR, noise stream seed."""

    grid_size: int = 128
    snr_db: float | None = 30.0  # None disables noise
    noise_seed: int = 0
    quantization: str = "none"  # "none" | "16bit"

    def __post_init__(self):
        if self.quantization not in ("none", "16bit"):
            raise ValueError(f"unknown quantization {self.quantization!r}")
        if self.grid_size < 1:
            raise ValueError("grid_size must be positive")

    @property
    def noise_amplitude_factor(self) -> float:
        """sigma / mean(I), i.e. 10^(-snr_db/20); 0 when noise is disabled."""
        if self.snr_db is None:
            return 0.0
        return 10.0 ** (-self.snr_db / 20.0)


@dataclass(frozen=True)
class SpeckleImage:
    """Detected intensity pattern plus provenance metadata."""

    intensities: np.ndarray  # (G, G), non-negative
    device_seed: int
    wavelength_nm: float
    snr_db: float | None


class PufDevice:
    """Immutable token: mode family + segments + mixing planes + facet mask."""

    def __init__(
        self,
        family: ModeFamily,
        segment_lengths_mm: np.ndarray,
        defect_planes: list[np.ndarray],
        input_mask: np.ndarray,
        device_seed: int,
        coupling_strength: float,
    ):
        if len(defect_planes) != len(segment_lengths_mm) - 1:
            raise InvalidSpecError("need exactly one defect plane between consecutive segments")
        self.family = family
        self.segment_lengths_mm = np.asarray(segment_lengths_mm, dtype=float)
        self.segment_lengths_mm.setflags(write=False)
        self.defect_planes = defect_planes
        self.input_mask = input_mask
        self.device_seed = device_seed
        self.coupling_strength = coupling_strength
        self._transfer_cache: dict[float, np.ndarray] = {}

    @property
    def spec(self) -> FiberSpec:
        return self.family.spec

    @property
    def n_modes(self) -> int:
        return self.family.n_modes

    @property
    def defect_count(self) -> int:
        return len(self.defect_planes)

    @property
    def total_length_mm(self) -> float:
        return float(self.segment_lengths_mm.sum())

    def transfer_matrix(self, wavelength_nm: float) -> np.ndarray:
        """Composite unitary map, segments and defect planes in spatial order."""
        cached = self._transfer_cache.get(wavelength_nm)
        if cached is not None:
            return cached
        betas = self.family.basis_at(wavelength_nm).betas_rad_per_um
        t = np.diag(np.exp(1j * betas * self.segment_lengths_mm[0] * UM_PER_MM))
        for plane, length_mm in zip(self.defect_planes, self.segment_lengths_mm[1:]):
            t = plane @ t
            t = np.exp(1j * betas * length_mm * UM_PER_MM)[:, None] * t
        t.setflags(write=False)
        self._transfer_cache[wavelength_nm] = t
        return t


def _unitary_from_hermitian(h: np.ndarray, eps: float) -> np.ndarray:
    """exp(i eps H) for Hermitian H, via eigendecomposition (unitary to rounding)."""
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(1j * eps * evals)) @ evecs.conj().T


def new_device(
    spec: FiberSpec | None = None,
    defect_count: int = DEFAULT_DEFECT_COUNT,
    coupling_strength: float = DEFAULT_COUPLING,
    total_length_mm: float = DEFAULT_TOTAL_LENGTH_MM,
    device_seed: int = 0,
    family: ModeFamily | None = None,
    mask_roughness: float = DEFAULT_MASK_ROUGHNESS,
    max_modes: int | None = None,
    grid_size: int | None = None,
) -> PufDevice:
    """Construct a device from its defining parameters.

    Defect positions are uniform along the length; each mixing plane is
    exp(i eps H) with H a symmetrized complex-Gaussian (GUE-like) matrix;
    the facet mask combines per-pixel random phase with amplitude dimming
    1 - roughness * uniform(0, 1).  Pass a shared ``family`` to reuse the
    mode solve across a device population.
    """
    if defect_count < 0:
        raise ValueError("defect_count must be >= 0")
    if not 0.0 <= coupling_strength <= 1.0:
        raise ValueError("coupling_strength must lie in [0, 1]")
    if total_length_mm <= 0:
        raise InvalidSpecError("total_length_mm must be positive")
    if family is None:
        kwargs = {}
        if max_modes is not None:
            kwargs["max_modes"] = max_modes
        if grid_size is not None:
            kwargs["grid_size"] = grid_size
        family = ModeFamily(spec if spec is not None else default_fiber(), **kwargs)
    elif spec is not None and spec != family.spec:
        raise InvalidSpecError("spec disagrees with the supplied mode family")

    m = family.n_modes
    g = family.grid_size
    rng = derive_rng(device_seed, "device")

    positions = np.sort(rng.uniform(0.0, total_length_mm, size=defect_count))
    edges = np.concatenate([[0.0], positions, [total_length_mm]])
    segment_lengths = np.diff(edges)

    planes = []
    for _ in range(defect_count):
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        if coupling_strength == 0.0:
            planes.append(np.eye(m, dtype=complex))
            continue
        h = 0.5 * (a + a.conj().T)
        planes.append(_unitary_from_hermitian(h, coupling_strength))

    phase = rng.uniform(0.0, 2.0 * np.pi, size=(g, g))
    dimming = 1.0 - mask_roughness * rng.uniform(0.0, 1.0, size=(g, g))
    mask = dimming * np.exp(1j * phase)
    mask.setflags(write=False)

    return PufDevice(
        family=family,
        segment_lengths_mm=segment_lengths,
        defect_planes=planes,
        input_mask=mask,
        device_seed=device_seed,
        coupling_strength=coupling_strength,
    )


def excite(device: PufDevice, challenge: Challenge) -> np.ndarray:
    """Project (mask * illumination) onto the mode basis; unit total power."""
    basis = device.family.basis_at(challenge.wavelength_nm)
    g = basis.grid_size
    if challenge.illumination is None:
        field = device.input_mask.ravel()
    else:
        illum = np.asarray(challenge.illumination)
        if illum.shape != (g, g):
            raise ValueError(f"illumination shape {illum.shape} != grid ({g}, {g})")
        field = (device.input_mask * illum).ravel()
    coeffs = (basis.profile_matrix() @ field) * basis.pixel_area_um2
    power = float(np.sum(np.abs(coeffs) ** 2))
    if power < 1e-30:
        raise DegenerateExcitationError("input field has no overlap with any guided mode")
    return coeffs / np.sqrt(power)


def propagate(device: PufDevice, coeffs: np.ndarray, wavelength_nm: float) -> np.ndarray:
    """Apply segment phases and defect planes in spatial order (unitary)."""
    if coeffs.shape != (device.n_modes,):
        raise ValueError("coefficient vector length must equal the mode count")
    betas = device.family.basis_at(wavelength_nm).betas_rad_per_um
    c = coeffs * np.exp(1j * betas * device.segment_lengths_mm[0] * UM_PER_MM)
    for plane, length_mm in zip(device.defect_planes, device.segment_lengths_mm[1:]):
        c = plane @ c
        c = c * np.exp(1j * betas * length_mm * UM_PER_MM)
    return c


def render_speckle(
    device: PufDevice,
    coeffs: np.ndarray,
    detector: DetectorSpec,
    wavelength_nm: float,
) -> SpeckleImage:
    """Square-law detection: I = |sum_m c_m psi_m|^2 plus additive Gaussian noise.

    Noise sigma is mean(I) * 10^(-snr_db/20), drawn from the detector's seed
    stream; negative pixels clamp to zero; optional 16-bit quantization
    rescales to the max pixel.
    """
    basis = device.family.basis_at(wavelength_nm)
    if detector.grid_size != basis.grid_size:
        raise ValueError(
            f"detector grid {detector.grid_size} != profile grid {basis.grid_size}"
        )
    field = (coeffs @ basis.profile_matrix()).reshape(basis.grid_size, basis.grid_size)
    intensity = np.abs(field) ** 2
    if detector.snr_db is not None:
        sigma = float(intensity.mean()) * detector.noise_amplitude_factor
        rng = derive_rng(detector.noise_seed, "detector-noise")
        intensity = intensity + sigma * rng.standard_normal(intensity.shape)
        np.clip(intensity, 0.0, None, out=intensity)
    if detector.quantization == "16bit":
        peak = intensity.max()
        if peak > 0:
            intensity = np.round(intensity * (65535.0 / peak))
    intensity.setflags(write=False)
    return SpeckleImage(
        intensities=intensity,
        device_seed=device.device_seed,
        wavelength_nm=wavelength_nm,
        snr_db=detector.snr_db,
    )


def respond(device: PufDevice, challenge: Challenge, detector: DetectorSpec) -> SpeckleImage:
    """Full challenge -> response path: excite, propagate, detect."""
    c0 = excite(device, challenge)
    c_out = propagate(device, c0, challenge.wavelength_nm)
    return render_speckle(device, c_out, detector, challenge.wavelength_nm)
