"""Pure-NumPy reference implementation of the cavity feature kernel."""
from __future__ import annotations

import numpy as np


def cavity_features(
    transfer: np.ndarray,
    excitations: np.ndarray,
    stream: np.ndarray,
    feature_profiles: np.ndarray,
    feedback_gain: float,
    input_gain: float,
    inv_area: float,
    noise_amp: np.ndarray,
    noise: np.ndarray | None,
) -> np.ndarray:
    """Run the cavity recursion and return per-step detected features.

    State update per step t:  c <- T (a * e[stream[t]] + g * c), c_0 = 0.
    Detected feature vector:  |Phi_f c|^2 + sigma_t * noise[t], clamped at 0,
    where sigma_t = ||c||^2 * inv_area * noise_amp[t] is the mean full-image
    intensity (by profile orthonormality) scaled by the per-step noise level.

    transfer:          (M, M) complex unitary
    excitations:       (K, M) complex, unit power each
    stream:            (T,) int frame indices into excitations
    feature_profiles:  (F, M) real mode amplitudes at the feature pixels
    noise_amp:         (T,) float 10^(-snr_db/20) per step (0 = noiseless)
    noise:             (T, F) standard normals, or None when all noise_amp = 0
    """
    n_steps = stream.shape[0]
    n_feat = feature_profiles.shape[0]
    features = np.empty((n_steps, n_feat))
    c = np.zeros(transfer.shape[0], dtype=complex)
    for t in range(n_steps):
        c = transfer @ (input_gain * excitations[stream[t]] + feedback_gain * c)
        field = feature_profiles @ c
        feat = field.real**2 + field.imag**2
        amp = noise_amp[t]
        if amp > 0.0:
            sigma = float(c.real @ c.real + c.imag @ c.imag) * inv_area * amp
            feat = feat + sigma * noise[t]
            np.clip(feat, 0.0, None, out=feat)
        features[t] = feat
    return features
