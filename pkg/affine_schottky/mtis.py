"""
Maximal Totally Isotropic Subspaces
Graph representation V_f = {t + f(t)} of isotropic subspaces, transversal
families, positive wings and frames.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .core_geometry import (
    TOLERANCE,
    FormHandle,
    FormKind,
    SpaceContext,
    Subspace,
    orthonormalize,
)
from .errors import (
    DegenerateFrameError,
    DimensionMismatchError,
    EvenDimensionError,
    NotIsotropicError,
    NotOrthogonalError,
    NotTransversalError,
    SpecValidationError,
)

logger = logging.getLogger("MtisFamily")


@dataclass(frozen=True, eq=False)
class MtisRep:
    """
    A maximal totally isotropic subspace, stored as the orthogonal map f: T -> S
    whose graph it is. f is a (d+1) x d matrix in the bases of the context.
    """

    ctx: SpaceContext
    f: np.ndarray

    @cached_property
    def basis(self) -> np.ndarray:
        """N0-orthonormal basis (t_j + f(t_j)) / sqrt(2)."""
        return (self.ctx.basis_T + self.ctx.basis_S @ self.f) / np.sqrt(2.0)

    @cached_property
    def subspace(self) -> Subspace:
        return Subspace(self.basis)

    @cached_property
    def q_complement(self) -> np.ndarray:
        """Basis of V^perp for Q (contains V, dimension d+1)."""
        return scipy.linalg.null_space(self.basis.T @ self.ctx.gram_Q)

    def to_list(self) -> List[List[float]]:
        return self.f.tolist()


@dataclass(frozen=True)
class TransversalityCheck:
    transversal: bool
    margin: float

    def __bool__(self) -> bool:
        return self.transversal


def mtis_from_map(ctx: SpaceContext, f: np.ndarray) -> MtisRep:
    """
    Build V_f = {t + f(t) | t in T}.

    Raises:
        DimensionMismatchError: If f is not (d+1) x d
        NotOrthogonalError: If f^T f differs from the identity
    """
    f = np.array(f, dtype=float)
    if f.ndim == 1 and ctx.d == 1:
        f = f[:, None]
    if f.shape != (ctx.d + 1, ctx.d):
        raise DimensionMismatchError(f"f must be {ctx.d + 1}x{ctx.d}, got {f.shape}")
    defect = np.abs(f.T @ f - np.eye(ctx.d)).max()
    if defect > TOLERANCE:
        raise NotOrthogonalError(f"f^T f deviates from the identity by {defect:.3e}")
    f.setflags(write=False)
    return MtisRep(ctx, f)


def map_from_mtis(ctx: SpaceContext, V: Union[Subspace, np.ndarray]) -> MtisRep:
    """
    Recover f_V = pi_S o (pi_T|_V)^{-1} from a maximal isotropic subspace.

    Raises:
        NotIsotropicError: If V has the wrong dimension or Q does not vanish on it
    """
    vectors = V.basis if isinstance(V, Subspace) else np.asarray(V, dtype=float)
    B = orthonormalize(vectors, ctx.gram_N0)
    if B.shape != (ctx.dim, ctx.d):
        raise NotIsotropicError(
            f"a maximal isotropic subspace has dimension {ctx.d}, got {B.shape[1]}"
        )
    isotropy = np.abs(B.T @ ctx.gram_Q @ B).max()
    if isotropy > TOLERANCE:
        raise NotIsotropicError(f"Q restricted to the subspace is {isotropy:.3e}, not 0")
    coords = ctx.coordinates(B)
    c_S, c_T = coords[: ctx.d + 1], coords[ctx.d + 1:]
    f = np.linalg.solve(c_T.T, c_S.T).T
    return mtis_from_map(ctx, f)


def is_transversal(V1: MtisRep, V2: MtisRep) -> TransversalityCheck:
    """V1 and V2 are transversal iff f1 - f2 is injective."""
    if V1.f.shape != V2.f.shape:
        raise DimensionMismatchError("subspaces live in different spaces")
    margin = float(scipy.linalg.svd(V1.f - V2.f, compute_uv=False).min())
    return TransversalityCheck(margin > TOLERANCE, margin)


def rotation_block(theta: float, size: int) -> np.ndarray:
    """Block-diagonal rotation by theta acting on R^size (size even)."""
    c, s = np.cos(theta), np.sin(theta)
    block = np.array([[c, -s], [s, c]])
    return scipy.linalg.block_diag(*([block] * (size // 2)))


def generate_transversal_family(
    ctx: SpaceContext,
    n: int,
    thetas: Optional[Sequence[float]] = None,
) -> List[MtisRep]:
    """
    2n pairwise transversal maximal isotropic subspaces V_{R_theta f0}.

    Args:
        ctx: Space context (d odd)
        n: Number of frames the family will be paired into
        thetas: 2n angles pairwise distinct mod 2*pi (default: equally spaced)

    Returns:
        List of 2n MtisRep, in the order of `thetas`

    Raises:
        EvenDimensionError: If d is even
        SpecValidationError: If the angles are not 2n pairwise distinct values
    """
    if ctx.d % 2 == 0:
        raise EvenDimensionError("rotation families need d+1 even")
    if n < 1:
        raise SpecValidationError(f"n must be positive, got {n}")
    if thetas is None:
        thetas = [np.pi * k / n for k in range(2 * n)]
    thetas = [float(t) for t in thetas]
    if len(thetas) != 2 * n:
        raise SpecValidationError(f"expected {2 * n} angles, got {len(thetas)}")
    for a in range(len(thetas)):
        for b in range(a + 1, len(thetas)):
            gap = np.angle(np.exp(1j * (thetas[a] - thetas[b])))
            if abs(gap) <= TOLERANCE:
                raise SpecValidationError(
                    f"angles {a} and {b} coincide mod 2*pi ({thetas[a]}, {thetas[b]})"
                )

    f0 = np.eye(ctx.d + 1, ctx.d)
    family = [mtis_from_map(ctx, rotation_block(t, ctx.d + 1) @ f0) for t in thetas]
    logger.debug(f"Generated {len(family)} isotropic subspaces for d={ctx.d}")
    return family


def random_orthogonal_map(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed (d+1) x d matrix with orthonormal columns."""
    q, r = np.linalg.qr(rng.standard_normal((d + 1, d)))
    return q * np.sign(np.diag(r))


@dataclass(frozen=True, eq=False)
class Wing:
    """The closed half-space {v + c * apex | v in V, c >= 0} of V^perp."""

    base: MtisRep
    apex: np.ndarray

    @cached_property
    def spanning_basis(self) -> np.ndarray:
        return np.column_stack([self.base.basis, self.apex])

    def coefficients(self, X: np.ndarray):
        """Least-squares coefficients of the rows of X on (basis of V, apex) and residual norms."""
        X = np.atleast_2d(X)
        coeffs, *_ = np.linalg.lstsq(self.spanning_basis, X.T, rcond=None)
        residual = np.linalg.norm(X.T - self.spanning_basis @ coeffs, axis=0)
        return coeffs.T, residual

    def contains(self, x: np.ndarray) -> bool:
        return wing_contains(self, x)


def positive_wing(ctx: SpaceContext, V: MtisRep) -> Wing:
    """
    Oriented apex direction of V.

    The apex e is N0-unit, lies in V^perp and is N0-orthogonal to V; its sign
    makes (direct basis of V, e) a direct basis of V^perp, where V is
    oriented through pi_T and V^perp through pi_S.
    """
    G0 = ctx.gram_N0
    perp = V.q_complement
    residual = perp - V.basis @ (V.basis.T @ G0 @ perp)
    normal = orthonormalize(residual, G0, rtol=1e-6)
    if normal.shape[1] != 1:
        raise DegenerateFrameError(
            f"V^perp / V should be a line, found dimension {normal.shape[1]}"
        )
    e = normal[:, 0]
    c_S = ctx.coordinates(e)[: ctx.d + 1]
    orientation = np.linalg.det(np.column_stack([V.f, c_S]))
    if orientation * ctx.orientation_S * ctx.orientation_T < 0:
        e = -e
    return Wing(V, e)


def wing_contains(wing: Wing, x: np.ndarray) -> bool:
    """True iff x = v + c * apex with v in V and c >= -tau * |x|."""
    x = np.asarray(x, dtype=float)
    scale = np.linalg.norm(x)
    if scale == 0.0:
        return True
    coeffs, residual = wing.coefficients(x[None, :])
    if residual[0] > TOLERANCE * scale:
        return False
    return bool(coeffs[0, -1] >= -TOLERANCE * scale)


@dataclass(frozen=True)
class WingIntersection:
    trivial: bool
    witness: Optional[np.ndarray] = None


def wings_intersection_check(V1: MtisRep, V2: MtisRep) -> WingIntersection:
    """
    Decide whether the positive wings of two transversal subspaces meet
    outside the origin. Their intersection lies on the line V1^perp n V2^perp.
    """
    check = is_transversal(V1, V2)
    if not check:
        raise NotTransversalError(f"subspaces are not transversal (margin {check.margin:.3e})")
    ctx = V1.ctx
    line = scipy.linalg.null_space(np.hstack([V1.basis, V2.basis]).T @ ctx.gram_Q)
    if line.shape[1] != 1:
        raise DegenerateFrameError(f"expected a common normal line, found dimension {line.shape[1]}")
    w = line[:, 0] / np.sqrt(line[:, 0] @ ctx.gram_N0 @ line[:, 0])
    wing1, wing2 = positive_wing(ctx, V1), positive_wing(ctx, V2)
    for candidate in (w, -w):
        if wing_contains(wing1, candidate) and wing_contains(wing2, candidate):
            return WingIntersection(False, candidate)
    return WingIntersection(True)


def _oriented_wing_frame(wing: Wing, form: FormHandle) -> np.ndarray:
    """Form-orthonormal basis of V^perp: a basis of V followed by the inward normal."""
    G = form.gram
    Uv = orthonormalize(wing.base.basis, G)
    normal = wing.apex - Uv @ (Uv.T @ G @ wing.apex)
    normal = normal / np.sqrt(normal @ G @ normal)
    return np.column_stack([Uv, normal])


def _hemisphere_max_pairing(M: np.ndarray) -> float:
    """max a^T M b over unit a, b whose last coordinates are >= 0."""
    u, s, vt = np.linalg.svd(M)
    top = s[0]
    multiplicity = int(np.sum(s >= top - 1e-12 * max(top, 1.0)))
    if multiplicity >= 2 or u[-1, 0] * vt[0, -1] >= 0:
        return float(top)
    # Optimum on the boundary of one hemisphere: the symmetric problem there
    # does not see the sign constraint of the other factor.
    rows = np.linalg.svd(M[:-1, :], compute_uv=False)[0] if M.shape[0] > 1 else 0.0
    cols = np.linalg.svd(M[:, :-1], compute_uv=False)[0] if M.shape[1] > 1 else 0.0
    return float(max(rows, cols))


def wing_pair_angle(w1: Wing, w2: Wing, form: FormHandle) -> float:
    """Angular distance between two wings, in closed form."""
    U1 = _oriented_wing_frame(w1, form)
    U2 = _oriented_wing_frame(w2, form)
    best = _hemisphere_max_pairing(U1.T @ form.gram @ U2)
    return float(np.arccos(np.clip(best, -1.0, 1.0)))


def wing_angle(wing: Wing, X: np.ndarray, form: FormHandle) -> np.ndarray:
    """Angle from each row of X to the wing."""
    X = np.atleast_2d(X)
    G = form.gram
    U = _oriented_wing_frame(wing, form)
    coeffs = X @ G @ U
    sq_norms = np.einsum("ij,jk,ik->i", X, G, X)
    d = U.shape[1] - 1
    inside = coeffs[:, -1] >= 0
    near_sq = np.where(
        inside,
        np.sum(coeffs ** 2, axis=1),
        np.sum(coeffs[:, :d] ** 2, axis=1),
    )
    far = np.sqrt(np.maximum(sq_norms - near_sq, 0.0))
    return np.arctan2(far, np.sqrt(near_sq))


def sample_wing(wing: Wing, rng: np.random.Generator, count: int) -> np.ndarray:
    """N0-unit rows drawn from the wing."""
    d = wing.base.basis.shape[1]
    v = rng.standard_normal((count, d)) @ wing.base.basis.T
    a = np.abs(rng.standard_normal(count))[:, None]
    X = v + a * wing.apex
    norms = np.sqrt(np.einsum("ij,jk,ik->i", X, wing.base.ctx.gram_N0, X))
    return X / norms[:, None]


@dataclass(frozen=True, eq=False)
class Frame:
    """
    Ordered pair (V_<, V_>) of transversal maximal isotropic subspaces with
    the fixed line V_= = V_<^perp n V_>^perp and its unit vector e_= in V_>'s wing.
    """

    V_less: MtisRep
    V_more: MtisRep
    V_eq: Subspace
    e_eq: np.ndarray

    @property
    def ctx(self) -> SpaceContext:
        return self.V_less.ctx

    @property
    def d(self) -> int:
        return self.ctx.d

    @cached_property
    def component_basis(self) -> np.ndarray:
        """Columns: basis of V_<, e_=, basis of V_>."""
        return np.column_stack([self.V_less.basis, self.e_eq, self.V_more.basis])

    @cached_property
    def _component_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.component_basis)

    @cached_property
    def eq_norm(self) -> float:
        """N0-norm of e_= (equal to 1 whenever V_= lies in S)."""
        return float(np.sqrt(self.e_eq @ self.ctx.gram_N0 @ self.e_eq))

    def components(self, X: np.ndarray):
        """
        Split rows of X along V_< + V_= + V_>.

        Returns:
            (coefficients in V_<, signed N_V-length along e_=, coefficients in V_>);
            the coefficient blocks are in N_V-orthonormal bases
        """
        X = np.atleast_2d(X)
        A = X @ self._component_inverse.T
        d = self.d
        return A[:, :d], A[:, d] * self.eq_norm, A[:, d + 1:]

    @cached_property
    def local_form(self) -> FormHandle:
        """N_V: pieces pairwise orthogonal, equal to N0 on each piece."""
        weights = np.ones(self.ctx.dim)
        weights[self.d] = self.eq_norm ** 2
        inv = self._component_inverse
        return FormHandle(FormKind.NV, inv.T @ np.diag(weights) @ inv)

    @cached_property
    def V_leq(self) -> Subspace:
        return self.ctx.subspace(np.column_stack([self.V_less.basis, self.e_eq]))

    @cached_property
    def V_geq(self) -> Subspace:
        return self.ctx.subspace(np.column_stack([self.V_more.basis, self.e_eq]))

    @cached_property
    def wing_less(self) -> Wing:
        return positive_wing(self.ctx, self.V_less)

    @cached_property
    def wing_more(self) -> Wing:
        return positive_wing(self.ctx, self.V_more)

    @cached_property
    def separation(self) -> float:
        return wing_pair_angle(self.wing_less, self.wing_more, self.ctx.form_N0())

    @property
    def sign_identities_hold(self) -> bool:
        """e_= in V_>'s wing and -e_= in V_<'s wing."""
        return wing_contains(self.wing_more, self.e_eq) and wing_contains(self.wing_less, -self.e_eq)

    def swapped(self) -> "Frame":
        return build_frame(self.V_more, self.V_less)

    def to_dict(self) -> Dict[str, Any]:
        return {"V_less": self.V_less.to_list(), "V_more": self.V_more.to_list()}


def build_frame(V_less: MtisRep, V_more: MtisRep) -> Frame:
    """
    Assemble a frame from two transversal maximal isotropic subspaces.

    Raises:
        NotTransversalError: If V_less and V_more intersect nontrivially
        DegenerateFrameError: If V_= is not a positive line
    """
    ctx = V_less.ctx
    if V_more.ctx.dim != ctx.dim:
        raise DimensionMismatchError("frame components live in different spaces")
    check = is_transversal(V_less, V_more)
    if not check:
        raise NotTransversalError(
            f"frame components are not transversal (margin {check.margin:.3e})"
        )

    line = scipy.linalg.null_space(np.hstack([V_less.basis, V_more.basis]).T @ ctx.gram_Q)
    if line.shape[1] != 1:
        raise DegenerateFrameError(f"V_= should be a line, found dimension {line.shape[1]}")
    e = line[:, 0]
    q = e @ ctx.gram_Q @ e
    if q <= 0:
        raise DegenerateFrameError(f"Q is not positive on V_= (Q(e) = {q:.3e})")
    e = e / np.sqrt(q)

    coeffs, _ = positive_wing(ctx, V_more).coefficients(e[None, :])
    if coeffs[0, -1] < 0:
        e = -e
    e.setflags(write=False)
    return Frame(V_less, V_more, ctx.subspace(e), e)


def frame_separation(frame: Frame, form: Optional[FormHandle] = None) -> float:
    """Angle between the two wings of the frame (N0 unless another form is given)."""
    if form is None:
        return frame.separation
    return wing_pair_angle(frame.wing_less, frame.wing_more, form)
