"""Exception hierarchy shared across the toolkit."""


class CycleSimError(Exception):
    """Base class for all toolkit errors."""


# --- ride file parsing ---

class MalformedFileError(CycleSimError):
    """Ride file has no separator line or no usable CSV header."""


class EmptyRideError(CycleSimError):
    """Ride file contains fewer than two geo rows."""


# --- trace filtering ---

class InvalidBandwidthError(CycleSimError):
    """Gaussian kernel bandwidth must be positive."""


class InvalidAlphaError(CycleSimError):
    """Low-pass smoothing factor must lie in (0, 1]."""


class DegenerateTraceError(CycleSimError):
    """Trace has too few points or zero time steps for speed derivation."""


# --- series statistics ---

class EmptySeriesError(CycleSimError):
    """Operation requires a non-empty series."""


class LengthMismatchError(CycleSimError):
    """Paired series must have equal length."""


class ZeroVarianceError(CycleSimError):
    """Correlation is undefined for a constant series."""


# --- distribution fitting ---

class QuantileDomainError(CycleSimError):
    """Quantile probability must lie strictly inside (0, 1)."""


class InsufficientDataError(CycleSimError):
    """Too few samples for a meaningful distribution fit."""


class NonPositiveSampleError(CycleSimError):
    """Positive-support distribution fitted against non-positive samples."""


# --- network / simulation ---

class InvalidGeometryError(CycleSimError):
    """Intersection geometry is inconsistent (missing approaches, bad sizes)."""


class InternalInconsistencyError(CycleSimError):
    """Simulation reached an impossible state (negative gap); indicates a bug."""


# --- artifact exchange ---

class ArtifactSchemaError(CycleSimError):
    """Artifact file is missing or carries an incompatible schema version."""
