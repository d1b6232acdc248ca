"""Exception hierarchy shared by all mepsim modules."""


class MepsimError(Exception):
    """Base class for all mepsim errors."""


class TopologyError(MepsimError):
    """Invalid topology construction arguments (degenerate sizes, bad ids)."""


class ConnectivityError(TopologyError):
    """The given edge set does not connect all nodes."""


class ParameterError(MepsimError):
    """Time parameters violate the protocol constraint chain or are malformed."""


class ScheduleUnderrunError(MepsimError):
    """An adversarial delay schedule ran out of entries for a directed edge."""


class InsufficientHorizonError(MepsimError):
    """The trace is too short for the requested stabilization analysis."""


class TraceParseError(MepsimError):
    """A persisted trace file is malformed."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigError(MepsimError):
    """An experiment configuration cannot be resolved into runnable objects."""
