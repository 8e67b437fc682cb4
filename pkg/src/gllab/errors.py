"""Exception types shared across the toolkit.

The CLI maps these onto its exit-code contract: invalid input (2),
construction failure (3), algebraic rejection (4).
"""


class GLLabError(Exception):
    """Base class for all toolkit errors."""


# --- invalid input -----------------------------------------------------------

class InvalidSpecError(GLLabError):
    """A constructor was given parameters outside its documented domain."""


class DomainMismatchError(GLLabError):
    """Two profile functions that must share a domain do not."""


class OutOfRegimeError(GLLabError):
    """An inequality check was requested outside the regime where it is valid."""


class InvalidBendError(GLLabError):
    """Quarter-bend geometric constraints violated."""


class InvalidWindowError(GLLabError):
    """Smoothing-band parameters are not strictly ordered."""


class HypothesisViolationError(GLLabError):
    """A declared hypothesis flag required for a cancellation step is missing."""


# --- construction / certification failure ------------------------------------

class SingularProfileError(GLLabError):
    """A warping function vanishes at an interior point."""


class ConstructionFailedError(GLLabError):
    """A numeric synthesis step (root find / parameter search) failed."""


class NoFeasibleBendError(ConstructionFailedError):
    """No initial bend angle could be certified within the search budget."""


class AssemblyError(ConstructionFailedError):
    """Curve pieces do not fit together (junction or landmark violation)."""


class TiltTooLargeError(ConstructionFailedError):
    """Tail tilt drives the profile non-positive."""


class InversionError(ConstructionFailedError):
    """Monotone numeric inversion failed (input not monotone)."""


class CertificationFailedError(ConstructionFailedError):
    """A positivity certificate could not be produced within budget."""

    def __init__(self, msg, best_margin=None):
        super().__init__(msg)
        self.best_margin = best_margin


class DegenerateEmbeddingError(GLLabError):
    """Embedding Jacobian is rank-deficient at a sample point."""


class CompilationFailedError(ConstructionFailedError):
    """Schedule compilation exhausted its search budget."""


class DemoFailedError(ConstructionFailedError):
    """A stage of the end-to-end demo failed its certificate."""

    def __init__(self, msg, stage=None):
        super().__init__(msg)
        self.stage = stage


# --- algebraic rejection ------------------------------------------------------

class AlgebraicRejection(GLLabError):
    """Base for combinatorial/Morse-algebra rejections."""


class InconsistentBoundaryError(AlgebraicRejection):
    """Declared boundary matrices do not square to zero."""


class NotACylinderError(AlgebraicRejection):
    """Chain complex is not exact, so it cannot come from a cylinder."""


class NoIntegralBasisError(AlgebraicRejection):
    """Normal form has non-unit invariant factors; no integral cancelling basis."""
