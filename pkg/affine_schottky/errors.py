"""
Error Hierarchy
Structured exceptions raised by the geometry, certification and CLI layers.

Certification *failures* are reported through report objects; the
exceptions below are reserved for invalid input and for numerical
situations where no verdict can be given.
"""


class AffineSchottkyError(ValueError):
    """Base class for every error raised by the package."""


class DimensionMismatchError(AffineSchottkyError):
    """A vector or matrix does not have the ambient dimension."""


class ZeroVectorError(AffineSchottkyError):
    """An angle or direction was requested for the zero vector."""


class IndefiniteFormError(AffineSchottkyError):
    """A metric operation was requested for a form that is not positive definite."""


class FormPreservationError(AffineSchottkyError):
    """A matrix does not preserve the quadratic form Q to tolerance."""


class NotOrthogonalError(AffineSchottkyError):
    """A map T -> S is not orthogonal."""


class NotIsotropicError(AffineSchottkyError):
    """A subspace is not maximal totally isotropic."""


class NotTransversalError(AffineSchottkyError):
    """Two maximal isotropic subspaces intersect nontrivially."""


class DegenerateFrameError(AffineSchottkyError):
    """A frame or splitting could not be assembled (singular change of basis)."""


class ContractionError(AffineSchottkyError):
    """A dynamical part is singular or not contracting enough."""


class InconclusiveSpectrumError(AffineSchottkyError):
    """Eigenvalue moduli fall inside the ambiguity band around 1."""


class NotPseudohyperbolicError(AffineSchottkyError):
    """An element of the group is not pseudohyperbolic."""


class NotProximalError(AffineSchottkyError):
    """A linear map has no simple dominant eigenvalue."""


class EmptyRegionError(AffineSchottkyError):
    """A sampled region produced no usable points."""


class CenterEquationError(AffineSchottkyError):
    """The center equation (Id + g) u = t is numerically singular."""


class EvenDimensionError(AffineSchottkyError):
    """The construction was requested for an even d, where positive wings always meet."""


class UncertifiedError(AffineSchottkyError):
    """An operation requires a certified group or an admissible translation."""


class SpecValidationError(AffineSchottkyError):
    """A group spec, space context or configuration file is malformed."""
