"""Speckle-PUF: a desk-scale simulator of a multimode-waveguide optical PUF.

Generates speckle responses of seeded virtual tokens, extracts 256-bit keys
and their distance statistics, quantifies key randomness, and runs the same
model as a cavity reservoir computer with a trainable linear readout.
"""

__version__ = "0.1.0"

from .fiber import (  # noqa: F401
    FiberSpec,
    ModeBasis,
    ModeFamily,
    ModeLabel,
    default_fiber,
    sample_profiles,
    solve_lp_modes,
    v_number,
)
from .device import (  # noqa: F401
    Challenge,
    DetectorSpec,
    PufDevice,
    SpeckleImage,
    excite,
    new_device,
    propagate,
    render_speckle,
    respond,
)
from .hashing import (  # noqa: F401
    BinaryKey,
    FhdStats,
    HashConfig,
    class_stats,
    fhd,
    gabor_hash,
    overlap_margin,
)
from .randomness import (  # noqa: F401
    BitStream,
    EntropyReport,
    TestReport,
    conditional_entropy,
    entropy_report,
    min_entropy,
    nist_subset,
)
from .reservoir import (  # noqa: F401
    CavityConfig,
    Codebook,
    ReadoutModel,
    evaluate,
    generate_codebook,
    run_cavity,
    sweep_error_surface,
    train_readout,
)
