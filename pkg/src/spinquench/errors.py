"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical guard failures with 3, and checkpoint/file problems
with 4. Library code raises; only the CLI translates.
"""


class SpinQuenchError(Exception):
    """Base class for all package errors."""


class ConfigError(SpinQuenchError):
    """Invalid parameter or inconsistent configuration."""


class NumericalError(SpinQuenchError):
    """A numerical guard tripped; results would be untrustworthy."""


class SvdError(NumericalError):
    """A per-sector SVD failed to converge."""


class NormDriftError(NumericalError):
    """Taylor propagation drifted beyond the norm tolerance."""


class SamplingError(NumericalError):
    """Boundary sampling hit a numerically impossible branch."""


class CheckpointError(SpinQuenchError):
    """Base class for checkpoint file problems."""


class CheckpointVersionError(CheckpointError):
    """Unrecognized magic or unsupported format version."""


class CheckpointChecksumError(CheckpointError):
    """Payload checksum mismatch; the file is corrupt."""


class CheckpointTruncatedError(CheckpointError):
    """The file ends before the declared payload and checksum."""
