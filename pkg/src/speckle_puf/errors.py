"""Exception types shared across the package."""


class InvalidSpecError(ValueError):
    """Fiber geometry or indices are non-physical."""


class ResolutionError(ValueError):
    """Pixel grid too coarse to resolve the highest-order mode."""


class WavelengthRangeError(ValueError):
    """Requested wavelength outside the range where the mode set is valid."""


class DegenerateExcitationError(ValueError):
    """Input field has (numerically) zero overlap with every guided mode."""


class InvalidConfigError(ValueError):
    """Configuration failed validation; message carries the field path."""


class InsufficientDataError(ValueError):
    """Not enough samples/bits for the requested statistic."""


class RegularizationRequiredError(ValueError):
    """Readout normal equations are singular and no ridge term was given."""


class CodebookSeedError(RuntimeError):
    """Codebook generation could not satisfy the distance constraint."""


class PipelineError(RuntimeError):
    """An orchestrated pipeline stage failed."""
