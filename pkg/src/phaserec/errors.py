"""Exception hierarchy shared across the pipeline."""


class PhaseRecError(Exception):
    """Base class for all package errors."""


class InvalidFrameError(PhaseRecError):
    """Frame geometry violates an operation's preconditions."""


class IngestionError(PhaseRecError):
    """A video source or annotation file could not be read."""


class ConfigError(PhaseRecError):
    """Inconsistent or out-of-range configuration."""


class CheckpointLoadError(PhaseRecError):
    """Checkpoint failed to load; carries the offending tensor names."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = list(offending or [])


class CostModelError(PhaseRecError):
    """Analytic cost model met a block type it cannot price."""


class NumericError(PhaseRecError):
    """Non-finite values appeared; names the layer that produced them."""


class ExportError(PhaseRecError):
    """Portable-graph export cannot represent the model."""


class ParityError(PhaseRecError):
    """Native and exported execution paths disagree."""
