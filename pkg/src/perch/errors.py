"""Exception taxonomy for the pipeline.

Every failure that a caller can meaningfully react to gets its own class;
everything inherits from PerchError so the CLI can catch one type, tag the
stage that raised it, and emit a structured report.
"""


class PerchError(Exception):
    """Base class for all package-specific failures."""


# ---- geometry / quadrature ----

class BadGeometry(PerchError):
    """Contour segment with zero length, invalid arc angles, or overlap."""


class TooCloseToContour(PerchError):
    """Off-contour evaluation requested within the node-spacing guard."""


class NearSingular(PerchError):
    """2x2 inversion with |det| below the configured floor."""


# ---- initial data ----

class ParseError(PerchError):
    """Malformed CSV or preset string."""


class UnknownPreset(PerchError):
    """Preset name not recognized."""


class PositivityViolation(PerchError):
    """m0 + 1 <= 0 somewhere on the grid."""


class EndpointViolation(PerchError):
    """m0 does not vanish at the interval endpoints."""


class SmoothnessViolation(PerchError):
    """Spectral tail of the sampled profile too large to trust."""


class IncompatibleEndpoints(PerchError):
    """Raw momentum differs at x = 0 and x = L, so no gauge shift exists."""


class SignCondition(PerchError):
    """m_raw + omega changes sign, so neither gauge case applies."""


class OutOfRange(PerchError):
    """Coordinate outside its domain (y outside [0, theta], etc.)."""


# ---- scattering ----

class BasisSingular(PerchError):
    """Wave-vector basis change is singular (k = 0)."""


class StiffnessFailure(PerchError):
    """Integration guard tripped: |Im k|*theta or |k| beyond the safe window."""


class NonGenericCase(PerchError):
    """rho = 0 at k = 0: the generic-case machinery does not apply."""


class MultiplicityDetected(PerchError):
    """Argument-principle count exceeds the number of simple zeros found."""


class DerivativeTooSmall(PerchError):
    """k-derivative too small to trust a residue or Newton step."""


class ClusterUnresolved(PerchError):
    """Two candidate zeros closer than the resolution of the polish step."""


class IdenticallyZero(PerchError):
    """Function vanishes identically, so a zero search is meaningless."""


# ---- branch structure ----

class WindowTooSmall(PerchError):
    """Sign pattern of the discriminant still changing at the window edge."""


class DoubleZeroUnresolved(PerchError):
    """Near-double zero of Delta^2 - 4 that is neither simple nor a closed gap."""


class BranchSelectionError(PerchError):
    """Sheet labeling failed its normalization or residual checks."""


class NotAPole(PerchError):
    """Requested residue at a point where this sheet stays bounded."""


class NearPole(PerchError):
    """Evaluation requested inside the guard radius of a pole."""


class BranchTrackingLost(PerchError):
    """Sheet consistency check failed away from any cut."""


class CrossValidationFailure(PerchError):
    """Two independent computations of one quantity disagree."""


# ---- assembly / solver ----

class ContourClash(PerchError):
    """Residue disk intersects another piece of the master contour."""


class PhasePole(PerchError):
    """Phase evaluation requested too close to its poles at +-i/2."""


class DenominatorCollapse(PerchError):
    """A G-function denominator vanished; the sheet labeling is wrong."""


class UnknownRegion(PerchError):
    """Jump requested for a region tag the contour does not define."""


class SideRequired(PerchError):
    """Jump or G evaluation on a cut without a side argument."""


class DiskOverlap(PerchError):
    """Residue disks collide with each other or with another segment."""


class LinearSolveFailure(PerchError):
    """Collocation matrix singular or estimated condition beyond the cap."""


class RootSelectionError(PerchError):
    """No admissible root of the pole-strength constraint."""


class JumpConsistencyError(PerchError):
    """Assembled jump fails det/symmetry/seam checks beyond tolerance."""


# ---- reconstruction / verification ----

class HistoryTooCoarse(PerchError):
    """Time history too sparse for the x-map quadrature."""


class VerificationFailure(PerchError):
    """An identity-based check exceeded its tolerance."""
