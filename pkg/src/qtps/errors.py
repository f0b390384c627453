"""Exception hierarchy shared across the toolkit.

Every error raised on a contract violation derives from QtpsError so
callers (and the CLI) can map failures to exit codes without matching on
message strings.
"""


class QtpsError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(QtpsError):
    """A precondition or invariant was violated by the caller."""


class IntegrationError(QtpsError):
    """Langevin step hit a non-finite energy or gradient."""

    def __init__(self, message, point=None, step_index=None):
        super().__init__(message)
        self.point = point
        self.step_index = step_index


class CapabilityError(QtpsError):
    """A potential does not support the requested derivative."""


class BandwidthError(QtpsError):
    """Degenerate point cloud: no positive kernel bandwidth exists."""

    def __init__(self, message, mean=None, std=None):
        super().__init__(message)
        self.mean = mean
        self.std = std


class DegenerateHullError(QtpsError):
    """Embedding points are collinear/coplanar; convex hull undefined."""


class NeighborhoodError(QtpsError):
    """Too few neighbors for a local PCA shooting move."""


class DirectionUndefinedError(QtpsError):
    """Boundary point coincides with its neighborhood centroid."""


class DegenerateEndpointsError(QtpsError):
    """Both endpoints map to the same reduced node."""


class GraphConnectivityError(QtpsError):
    """Edge thresholds disconnect the source from the target."""

    def __init__(self, message, components=None):
        super().__init__(message)
        self.components = components or []


class WeightConfigError(QtpsError):
    """Edge-weight parameters produce a non-positive weight or radicand."""

    def __init__(self, message, node=None, required_s0=None):
        super().__init__(message)
        self.node = node
        self.required_s0 = required_s0


class NoPathError(QtpsError):
    """No path between source and target."""


class EnumerationLimitError(QtpsError):
    """Problem too large for exhaustive enumeration."""


class AnnealerError(QtpsError):
    """Base class for trial-path backend failures."""


class RemoteTransportError(AnnealerError):
    """Connection-level failure talking to the remote QUBO service."""


class RemoteTimeoutError(AnnealerError):
    """The remote QUBO service did not answer within the deadline."""


class RemoteProtocolError(AnnealerError):
    """The remote QUBO service returned a malformed response."""


class CalibrationError(QtpsError):
    """A calibration budget produced no valid-topology outcome."""

    def __init__(self, message, budget=None):
        super().__init__(message)
        self.budget = budget


class CalibrationRangeError(QtpsError):
    """Requested budget lies outside the calibrated grid."""


class ChainAbortedError(QtpsError):
    """Too many backend failures; the Markov chain gave up."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = records or []


class ProvenanceError(QtpsError):
    """Upstream artifact was produced with a different configuration."""
