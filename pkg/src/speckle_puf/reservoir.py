"""Cavity reservoir computing on top of the PUF model.

The device sits in a short feedback cavity: each step injects the excitation
of the current input frame, adds the recirculated field scaled by the
feedback gain, and applies the device's unitary transfer map.  The detector
square law is the only nonlinearity; a ridge-regression readout on sampled
detector pixels does the classification.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .device import DetectorSpec, PufDevice, excite, Challenge
from .errors import CodebookSeedError, RegularizationRequiredError
from .seeding import derive_rng, derive_seed

DEFAULT_CLASSES = 4
DEFAULT_FEEDBACK_GAIN = 0.6
DEFAULT_INPUT_GAIN = 1.0
DEFAULT_RIDGE = 1e-3
DEFAULT_FEATURE_COUNT = 256
DEFAULT_BLOCK_GRID = 8


@dataclass(frozen=True)
class Codebook:
    """K distinct binary frames (macro-block patterns upsampled to the grid)."""

    frames: np.ndarray  # (K, G, G) uint8
    codebook_seed: int

    @property
    def n_classes(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class CavityConfig:
    """Feedback-loop parameters; feedback_gain < 1 gives fading memory."""

    feedback_gain: float = DEFAULT_FEEDBACK_GAIN
    input_gain: float = DEFAULT_INPUT_GAIN
    steps_per_frame: int = 1

    def __post_init__(self):
        if not 0.0 <= self.feedback_gain < 1.0:
            raise ValueError("feedback_gain must lie in [0, 1) (fading memory)")
        if self.input_gain <= 0.0:
            raise ValueError("input_gain must be positive")
        if self.steps_per_frame < 1:
            raise ValueError("steps_per_frame must be >= 1")

    def settle_steps(self, tolerance: float = 1e-6) -> int:
        """Steps after which an initial-state difference decays below tolerance."""
        if self.feedback_gain == 0.0:
            return 1
        return int(math.ceil(math.log(tolerance) / math.log(self.feedback_gain)))


@dataclass(frozen=True)
class ReadoutModel:
    """Trained linear readout: weights (F+1, K) incl. bias row."""

    weights: np.ndarray
    ridge: float
    feature_pixels: np.ndarray  # flat detector pixel indices

    def scores(self, features: np.ndarray) -> np.ndarray:
        x = np.column_stack([features, np.ones(features.shape[0])])
        return x @ self.weights

    def predict(self, features: np.ndarray) -> np.ndarray:
        # argmax breaks ties toward the lowest class index
        return np.argmax(self.scores(features), axis=1)


def generate_codebook(
    n_classes: int = DEFAULT_CLASSES,
    grid_size: int = 128,
    codebook_seed: int = 0,
    block_grid: int = DEFAULT_BLOCK_GRID,
    min_distance: float = 0.3,
    max_tries: int = 200,
) -> Codebook:
    """Random QR-like binary block patterns with pairwise distance >= 0.3."""
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    rng = derive_rng(codebook_seed, "codebook")
    upsample = grid_size // block_grid
    if upsample < 1:
        raise ValueError("grid smaller than the macro-block grid")
    for _ in range(max_tries):
        blocks = rng.integers(0, 2, size=(n_classes, block_grid, block_grid), dtype=np.uint8)
        dists = [
            np.mean(blocks[i] != blocks[j])
            for i in range(n_classes)
            for j in range(i + 1, n_classes)
        ]
        if min(dists) >= min_distance:
            frames = np.kron(blocks, np.ones((upsample, upsample), dtype=np.uint8))
            if frames.shape[1] != grid_size:
                pad = grid_size - frames.shape[1]
                frames = np.pad(frames, ((0, 0), (0, pad), (0, pad)), mode="edge")
            frames.setflags(write=False)
            return Codebook(frames=frames, codebook_seed=codebook_seed)
    raise CodebookSeedError(
        f"no {n_classes}-frame codebook with pairwise distance >= {min_distance} "
        f"after {max_tries} draws from seed {codebook_seed}"
    )


def sample_feature_pixels(
    grid_size: int,
    n_features: int = DEFAULT_FEATURE_COUNT,
    feature_seed: int = 0,
    radius_frac: float = 0.30,
) -> np.ndarray:
    """Distinct flat pixel indices inside the illuminated disk."""
    rng = derive_rng(feature_seed, "feature-pixels")
    c = (grid_size - 1) / 2.0
    radius = radius_frac * grid_size
    seen: set[int] = set()
    out = []
    while len(out) < n_features:
        r, q = rng.integers(0, grid_size, size=2)
        if (r - c) ** 2 + (q - c) ** 2 > radius**2:
            continue
        flat = int(r) * grid_size + int(q)
        if flat in seen:
            continue
        seen.add(flat)
        out.append(flat)
    return np.array(out)


def class_excitations(
    device: PufDevice, codebook: Codebook, wavelength_nm: float
) -> np.ndarray:
    """Unit-power excitation coefficients of every codebook frame, (K, M)."""
    rows = [
        excite(device, Challenge(wavelength_nm=wavelength_nm, illumination=frame.astype(complex)))
        for frame in codebook.frames
    ]
    return np.array(rows)


def run_cavity(
    device: PufDevice,
    stream: np.ndarray,
    cavity: CavityConfig,
    detector: DetectorSpec,
    codebook: Codebook,
    feature_pixels: np.ndarray,
    wavelength_nm: float | None = None,
    snr_per_step_db: np.ndarray | None = None,
    backend: str | None = None,
) -> np.ndarray:
    """Drive the cavity with a frame-index stream; return per-step features.

    Features are the detected intensities at ``feature_pixels`` (additive
    Gaussian noise at the detector SNR, negatives clamped).  One feature
    vector per cavity step; frames held for ``steps_per_frame`` steps.
    ``snr_per_step_db`` (per frame, pre-repeat) overrides the detector SNR,
    enabling mixed-SNR training sets.
    """
    stream = np.asarray(stream, dtype=np.int64)
    if stream.size == 0:
        raise ValueError("stream must be non-empty")
    wl = device.spec.wavelength_ref_nm if wavelength_nm is None else wavelength_nm
    basis = device.family.basis_at(wl)
    transfer = device.transfer_matrix(wl)
    excitations = class_excitations(device, codebook, wl)

    if snr_per_step_db is None:
        amp_per_frame = np.full(stream.size, 0.0 if detector.snr_db is None
                                else 10.0 ** (-detector.snr_db / 20.0))
    else:
        snr_arr = np.asarray(snr_per_step_db, dtype=float)
        if snr_arr.shape != stream.shape:
            raise ValueError("snr_per_step_db must match the stream length")
        amp_per_frame = 10.0 ** (-snr_arr / 20.0)

    steps = np.repeat(stream, cavity.steps_per_frame)
    noise_amp = np.repeat(amp_per_frame, cavity.steps_per_frame)
    profile_rows = basis.profile_matrix()[:, feature_pixels]  # (M, F)
    inv_area = 1.0 / (basis.grid_extent_um**2)

    noise = None
    if np.any(noise_amp > 0.0):
        rng = derive_rng(detector.noise_seed, "cavity-noise")
        noise = rng.standard_normal((steps.size, feature_pixels.size))

    return _kernels.cavity_features(
        transfer,
        excitations,
        steps,
        np.ascontiguousarray(profile_rows.T),
        cavity.feedback_gain,
        cavity.input_gain,
        inv_area,
        noise_amp,
        noise,
        backend=backend,
    )


def train_readout(
    features: np.ndarray, labels: np.ndarray, ridge: float = DEFAULT_RIDGE,
    feature_pixels: np.ndarray | None = None,
) -> ReadoutModel:
    """One-hot ridge regression via the normal equations, bias included."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[0] != labels.shape[0]:
        raise ValueError("features and labels disagree on sample count")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    n_classes = int(labels.max()) + 1
    onehot = np.zeros((labels.size, n_classes))
    onehot[np.arange(labels.size), labels] = 1.0
    x = np.column_stack([features, np.ones(features.shape[0])])
    gram = x.T @ x + ridge * np.eye(x.shape[1])
    rhs = x.T @ onehot
    if ridge == 0.0:
        # unregularized solve must be genuinely well-posed
        if np.linalg.matrix_rank(gram) < gram.shape[0]:
            raise RegularizationRequiredError(
                "normal equations are singular; pass ridge > 0"
            )
    weights = np.linalg.solve(gram, rhs)
    return ReadoutModel(
        weights=weights,
        ridge=ridge,
        feature_pixels=feature_pixels if feature_pixels is not None else np.array([]),
    )


def evaluate(model: ReadoutModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Misclassification fraction of argmax predictions."""
    predictions = model.predict(np.asarray(features, dtype=float))
    return float(np.mean(predictions != np.asarray(labels)))


@dataclass(frozen=True)
class SweepCell:
    """One (defect count, SNR) cell of the error surface."""

    defects: int
    snr_db: float
    mean_error: float
    std_error: float
    trials: int


def run_trial(
    device: PufDevice,
    codebook: Codebook,
    cavity: CavityConfig,
    feature_pixels: np.ndarray,
    test_snr_db: float,
    train_snr_choices: np.ndarray,
    train_frames: int,
    test_frames: int,
    ridge: float,
    trial_seed: int,
    backend: str | None = None,
) -> float:
    """Train on mixed-SNR streams (>= the test SNR), evaluate at the test SNR."""
    k = codebook.n_classes
    washout = max(cavity.settle_steps(1e-3), 8)
    rng = derive_rng(trial_seed, "rc-streams")
    train_stream = rng.integers(0, k, size=train_frames + washout)
    test_stream = rng.integers(0, k, size=test_frames + washout)
    train_snr = train_snr_choices[
        rng.integers(0, train_snr_choices.size, size=train_stream.size)
    ]
    spf = cavity.steps_per_frame
    detector_train = DetectorSpec(
        grid_size=device.family.grid_size,
        snr_db=test_snr_db,
        noise_seed=derive_seed(trial_seed, "rc-train-noise"),
    )
    detector_test = DetectorSpec(
        grid_size=device.family.grid_size,
        snr_db=test_snr_db,
        noise_seed=derive_seed(trial_seed, "rc-test-noise"),
    )
    feats_train = run_cavity(
        device, train_stream, cavity, detector_train, codebook, feature_pixels,
        snr_per_step_db=train_snr, backend=backend,
    )
    feats_test = run_cavity(
        device, test_stream, cavity, detector_test, codebook, feature_pixels,
        backend=backend,
    )
    labels_train = np.repeat(train_stream, spf)[washout * spf :]
    labels_test = np.repeat(test_stream, spf)[washout * spf :]
    model = train_readout(
        feats_train[washout * spf :], labels_train, ridge, feature_pixels
    )
    return evaluate(model, feats_test[washout * spf :], labels_test)


def sweep_error_surface(
    defect_counts,
    snr_levels_db,
    trials: int = 10,
    *,
    device_builder,
    n_classes: int = DEFAULT_CLASSES,
    cavity: CavityConfig | None = None,
    train_frames: int = 200,
    test_frames: int = 200,
    ridge: float = DEFAULT_RIDGE,
    feature_count: int = DEFAULT_FEATURE_COUNT,
    master_seed: int = 0,
    grid_size: int = 128,
    backend: str | None = None,
    map_fn=map,
) -> list[SweepCell]:
    """Classification error over a (defect count x SNR) grid.

    ``device_builder(defect_count, device_seed)`` supplies devices (sharing a
    mode family across the grid makes this cheap).  Training sets mix sample
    SNRs drawn from the sweep levels at or above the cell's SNR; the test
    stream runs at exactly the cell's SNR.  Deterministic in ``master_seed``,
    including across ``map_fn`` parallelization.
    """
    if len(defect_counts) == 0 or len(snr_levels_db) == 0:
        raise ValueError("defect_counts and snr_levels_db must be non-empty")
    cavity = cavity if cavity is not None else CavityConfig()
    snr_levels_db = sorted(float(s) for s in snr_levels_db)
    feature_pixels = sample_feature_pixels(
        grid_size, feature_count, feature_seed=derive_seed(master_seed, "rc-features")
    )

    tasks = []
    for defects in defect_counts:
        for snr_db in snr_levels_db:
            choices = np.array([s for s in snr_levels_db if s >= snr_db])
            for trial in range(trials):
                tasks.append((int(defects), float(snr_db), choices, trial))

    def one(task):
        defects, snr_db, choices, trial = task
        cell_seed = derive_seed(master_seed, "rc-cell", defects, snr_db, trial)
        device = device_builder(defects, derive_seed(cell_seed, "device"))
        codebook = generate_codebook(
            n_classes, grid_size, codebook_seed=derive_seed(cell_seed, "codebook")
        )
        return run_trial(
            device, codebook, cavity, feature_pixels, snr_db, choices,
            train_frames, test_frames, ridge,
            trial_seed=derive_seed(cell_seed, "trial"), backend=backend,
        )

    errors = list(map_fn(one, tasks))
    cells = []
    idx = 0
    for defects in defect_counts:
        for snr_db in snr_levels_db:
            cell_errors = np.array(errors[idx : idx + trials])
            idx += trials
            cells.append(
                SweepCell(
                    defects=int(defects),
                    snr_db=float(snr_db),
                    mean_error=float(cell_errors.mean()),
                    std_error=float(cell_errors.std()),
                    trials=trials,
                )
            )
    return cells
