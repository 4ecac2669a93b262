"""Exception types shared across the package."""


class FermifilterError(Exception):
    """Base class for package errors."""


class DimensionMismatchError(FermifilterError, ValueError):
    """Operands have incompatible shapes."""


class OrthogonalStatesError(FermifilterError, ArithmeticError):
    """Gamma_1 + Gamma_2 is (near-)singular: the two pure states are
    (near-)orthogonal and the two-state trace formula is undefined.

    Callers may treat the quantity as zero when the independently computed
    Loschmidt echo magnitude is below 1e-10.
    """


class OverlapFloorError(FermifilterError, ArithmeticError):
    """Insufficient overlap with the energy window: the filtered-state
    normalization fell below the configured floor."""


class SpectralWeightError(FermifilterError, ArithmeticError):
    """No spectral weight at the requested energy in this sector."""


class ConfigError(FermifilterError, ValueError):
    """Invalid experiment configuration."""
