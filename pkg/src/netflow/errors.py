"""Exception hierarchy for the network flow toolkit."""


class NetworkFlowError(Exception):
    """Base class for all errors raised by this package."""


# -- geometry -----------------------------------------------------------------

class DegenerateCurve(NetworkFlowError):
    """Consecutive samples of a curve coincide (curve is not regular)."""


class NotConnected(NetworkFlowError):
    """Operation requires a connected network."""


class NoEndpoint(NetworkFlowError):
    """Operation requires at least one fixed endpoint."""


class InvariantViolation(NetworkFlowError):
    """A structural invariant of a network does not hold."""


# -- junctions ----------------------------------------------------------------

class InconsistentJunction(NetworkFlowError):
    """Velocity evaluated from the three curves of a junction disagrees."""


# -- solver -------------------------------------------------------------------

class SingularSystem(NetworkFlowError):
    """The linear system of a time step could not be solved."""


class AngleIterationDiverged(NetworkFlowError):
    """Junction angle correction did not reach tolerance within the
    allowed fixed-point iterations."""


class StepRejected(NetworkFlowError):
    """A time step would degenerate a curve and was rejected."""


# -- diagnostics --------------------------------------------------------------

class ProbeNotInFuture(NetworkFlowError):
    """Density probe time t0 must lie strictly after the snapshot time."""


class WindowEmpty(NetworkFlowError):
    """No snapshots fall inside the requested rescaled-time window."""


# -- events / surgery ---------------------------------------------------------

class NotInnerCurve(NetworkFlowError):
    """Curve does not join two triple junctions."""


class NotShortEnough(NetworkFlowError):
    """Curve length is above the collapse threshold."""


class NotFourPoint(NetworkFlowError):
    """Vertex is not a 4-valent surgery point."""


class NoAdmissibleOpening(NetworkFlowError):
    """The arms of a 4-point are not in the 60/120 degree position, so no
    regular reopening exists (e.g. the symmetric 90-degree configuration)."""


class NotBoundaryCurve(NetworkFlowError):
    """Curve does not join a fixed endpoint to a triple junction."""


class NotCollapsedEndpoint(NetworkFlowError):
    """Endpoint is not a 2-valent collapsed boundary vertex, or the
    reopening offset is too large for the local geometry."""


# -- scenarios / io -----------------------------------------------------------

class AngleConditionViolated(NetworkFlowError):
    """Endpoint placement does not satisfy the wide-angle condition."""


class TopologyNotAdmissible(NetworkFlowError):
    """No Steiner network with the requested topology exists."""


class ParseError(NetworkFlowError):
    """A network file could not be parsed."""
