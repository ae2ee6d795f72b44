"""
Pseudohyperbolic Maps
Construction from (frame, dynamical part), spectral splitting of arbitrary
elements of O(d+1, d), contraction strength and Q-preserving group
operations on assembled matrices.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from .core_geometry import TOLERANCE, SpaceContext, Subspace
from .errors import (
    AffineSchottkyError,
    ContractionError,
    DimensionMismatchError,
    FormPreservationError,
    InconclusiveSpectrumError,
    NotPseudohyperbolicError,
)
from .mtis import Frame, build_frame, map_from_mtis

logger = logging.getLogger("PseudoHyperbolic")

# Width of the ambiguity band around modulus 1.
MODULUS_BAND = 1e-6
# Construction requires rho(g_<) <= 1 - MIN_RHO_GAP.
MIN_RHO_GAP = 1e-4
# Relative Q-defect above which an input is not treated as an element of O(d+1, d).
FORM_DEFECT_LIMIT = 1e-6

LinearAction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class PseudoHyperbolicMap:
    """g = g_< + Id on V_= + g_>, with g_> dual to g_<^{-1} under Q."""

    frame: Frame
    g_less: np.ndarray
    g_more: np.ndarray
    matrix: np.ndarray

    @property
    def ctx(self) -> SpaceContext:
        return self.frame.ctx

    @cached_property
    def strength(self) -> float:
        return contraction_strength(self)

    @cached_property
    def spectral_radius_less(self) -> float:
        return float(np.abs(np.linalg.eigvals(self.g_less)).max())

    @cached_property
    def inverse_matrix(self) -> np.ndarray:
        return invert(self.ctx, self.matrix)

    @cached_property
    def determinant(self) -> float:
        return float(np.linalg.det(self.g_less) * np.linalg.det(self.g_more))

    def to_dict(self) -> Dict[str, Any]:
        return {"frame": self.frame.to_dict(), "g_less": self.g_less.tolist()}


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    V_less: Subspace
    V_eq: Subspace
    V_more: Subspace
    moduli_less: List[float]
    moduli_eq: List[float]
    moduli_more: List[float]
    eigenvalues_eq: List[complex] = field(default_factory=list)

    @property
    def dims(self):
        return (self.V_less.dim, self.V_eq.dim, self.V_more.dim)


@dataclass(frozen=True)
class PseudoHyperbolicCheck:
    pseudohyperbolic: bool
    reason: str
    dims: tuple
    eq_eigenvalue: Optional[complex] = None

    def __bool__(self) -> bool:
        return self.pseudohyperbolic


@dataclass(frozen=True)
class StrengthSample:
    power: int
    strength: float
    rho_power: float
    ratio: float


def _as_dynamical_part(frame: Frame, g_less) -> np.ndarray:
    A = np.array(g_less, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.shape != (frame.d, frame.d):
        raise DimensionMismatchError(f"g_less must be {frame.d}x{frame.d}, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractionError("g_less has non-finite entries")
    return A


def _assemble(frame: Frame, A: np.ndarray) -> PseudoHyperbolicMap:
    ctx = frame.ctx
    B_less, B_more = frame.V_less.basis, frame.V_more.basis
    # Q-pairing between V_< and V_>; g_> is fixed by A^T P g_> = P
    P = B_less.T @ ctx.gram_Q @ B_more
    C = np.linalg.solve(P, np.linalg.solve(A.T, P))
    M = frame.component_basis
    blocks = scipy.linalg.block_diag(A, np.ones((1, 1)), C)
    matrix = np.linalg.solve(M.T, (M @ blocks).T).T
    for value in (A, C, matrix):
        value.setflags(write=False)
    return PseudoHyperbolicMap(frame, A, C, matrix)


def build_pseudohyperbolic(
    frame: Frame,
    g_less,
    min_rho_gap: float = MIN_RHO_GAP,
    tol: float = TOLERANCE,
) -> PseudoHyperbolicMap:
    """
    Assemble the pseudohyperbolic map with frame `frame` and dynamical part `g_less`.

    Args:
        frame: Frame (V_<, V_>)
        g_less: d x d matrix acting on V_< in the basis of frame.V_less
        min_rho_gap: Required gap 1 - rho(g_less)
        tol: Rank cutoff; g_less with condition number above 1/tol is singular

    Returns:
        PseudoHyperbolicMap whose matrix preserves Q and has determinant 1

    Raises:
        ContractionError: If g_less is singular or rho(g_less) > 1 - min_rho_gap
    """
    A = _as_dynamical_part(frame, g_less)
    if np.linalg.cond(A) > 1.0 / tol:
        raise ContractionError(f"g_less is numerically singular (cond {np.linalg.cond(A):.3e})")
    rho = float(np.abs(np.linalg.eigvals(A)).max())
    if rho > 1.0 - min_rho_gap:
        raise ContractionError(
            f"spectral radius of g_less is {rho:.6f}, construction needs <= {1.0 - min_rho_gap}"
        )
    g = _assemble(frame, A)
    logger.debug(f"Built pseudohyperbolic map: rho={rho:.3e}, s={g.strength:.3e}")
    return g


def q_defect(ctx: SpaceContext, g: np.ndarray) -> float:
    """Relative drift ||g^T G g - G|| / (||g||^2 ||G||)."""
    G = ctx.gram_Q
    return float(
        np.linalg.norm(g.T @ G @ g - G) / (np.linalg.norm(g) ** 2 * np.linalg.norm(G))
    )


def reorthogonalize(ctx: SpaceContext, g: np.ndarray) -> np.ndarray:
    """One Newton step of g^T G g = G."""
    G = ctx.gram_Q
    E = g.T @ G @ g - G
    return g - 0.5 * g @ (ctx.gram_Q_inverse @ E)


def compose(ctx: SpaceContext, g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
    """g1 g2, pulled back onto O(Q) when the drift exceeds tau / 10."""
    product = np.asarray(g1, dtype=float) @ np.asarray(g2, dtype=float)
    if q_defect(ctx, product) > TOLERANCE / 10:
        product = reorthogonalize(ctx, product)
    return product


def invert(ctx: SpaceContext, g: np.ndarray) -> np.ndarray:
    """g^{-1} = G^{-1} g^T G for g preserving Q."""
    g = np.asarray(g, dtype=float)
    if g.shape != (ctx.dim, ctx.dim):
        raise DimensionMismatchError(f"expected a {ctx.dim}x{ctx.dim} matrix, got {g.shape}")
    return ctx.gram_Q_inverse @ g.T @ ctx.gram_Q


def inverse(g: PseudoHyperbolicMap) -> PseudoHyperbolicMap:
    """g^{-1}: swapped frame, dynamical part g_>^{-1}."""
    return _assemble(g.frame.swapped(), np.linalg.inv(g.g_more))


def spectral_split(
    ctx: SpaceContext,
    g: np.ndarray,
    band: float = MODULUS_BAND,
    tol: float = TOLERANCE,
) -> SpectralSplit:
    """
    Split the space into the invariant subspaces of moduli < 1, = 1, > 1.

    Raises:
        InconclusiveSpectrumError: If a modulus falls in the band around 1
            without being equal to 1, or the ordered Schur form is unstable
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (ctx.dim, ctx.dim):
        raise DimensionMismatchError(f"expected a {ctx.dim}x{ctx.dim} matrix, got {g.shape}")

    eigenvalues = np.linalg.eigvals(g)
    moduli = np.abs(eigenvalues)
    offset = np.abs(moduli - 1.0)
    ambiguous = (offset > tol) & (offset < band)
    if np.any(ambiguous):
        raise InconclusiveSpectrumError(
            f"eigenvalue moduli {moduli[ambiguous].tolist()} lie within {band} of 1"
        )

    selectors = {
        "less": lambda re, im: np.hypot(re, im) < 1.0 - band,
        "eq": lambda re, im: abs(np.hypot(re, im) - 1.0) <= band,
        "more": lambda re, im: np.hypot(re, im) > 1.0 + band,
    }
    masks = {
        "less": moduli < 1.0 - band,
        "eq": offset <= band,
        "more": moduli > 1.0 + band,
    }
    spaces = {}
    for key, select in selectors.items():
        expected = int(masks[key].sum())
        if expected == 0:
            spaces[key] = Subspace(np.zeros((ctx.dim, 0)))
            continue
        try:
            _, Z, sdim = scipy.linalg.schur(g, output="real", sort=select)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise InconclusiveSpectrumError(f"ordered Schur form failed for block '{key}': {e}") from e
        if sdim != expected:
            raise InconclusiveSpectrumError(
                f"block '{key}' has {sdim} Schur vectors but {expected} eigenvalues"
            )
        spaces[key] = ctx.subspace(Z[:, :sdim])

    return SpectralSplit(
        V_less=spaces["less"],
        V_eq=spaces["eq"],
        V_more=spaces["more"],
        moduli_less=sorted(moduli[masks["less"]].tolist()),
        moduli_eq=sorted(moduli[masks["eq"]].tolist()),
        moduli_more=sorted(moduli[masks["more"]].tolist()),
        eigenvalues_eq=eigenvalues[masks["eq"]].tolist(),
    )


def is_pseudohyperbolic(ctx: SpaceContext, g: np.ndarray) -> PseudoHyperbolicCheck:
    """
    True iff dim V_=(g) = 1 and g acts there as +1.

    Raises:
        FormPreservationError: If g does not preserve Q
        InconclusiveSpectrumError: If the spectral split is inconclusive
    """
    g = np.asarray(g, dtype=float)
    defect = q_defect(ctx, g)
    if defect > FORM_DEFECT_LIMIT:
        raise FormPreservationError(f"matrix does not preserve Q (relative defect {defect:.3e})")
    split = spectral_split(ctx, g)
    if split.V_eq.dim != 1:
        return PseudoHyperbolicCheck(
            False, f"dim V_= is {split.V_eq.dim}, expected 1", split.dims
        )
    value = complex(split.eigenvalues_eq[0])
    if value.real <= 0:
        return PseudoHyperbolicCheck(
            False, f"eigenvalue on V_= is {value.real:+.6f}, expected +1", split.dims, value
        )
    return PseudoHyperbolicCheck(True, "ok", split.dims, value)


def extract_dynamical_part(ctx: SpaceContext, g: np.ndarray) -> PseudoHyperbolicMap:
    """
    Recover (frame, g_<) from the matrix of a pseudohyperbolic map.

    Raises:
        NotPseudohyperbolicError: If g is not pseudohyperbolic
    """
    check = is_pseudohyperbolic(ctx, g)
    if not check:
        raise NotPseudohyperbolicError(check.reason)
    split = spectral_split(ctx, g)
    frame = build_frame(map_from_mtis(ctx, split.V_less), map_from_mtis(ctx, split.V_more))
    B = frame.V_less.basis
    A = B.T @ ctx.gram_N0 @ np.asarray(g, dtype=float) @ B
    return _assemble(frame, A)


def contraction_strength(g: PseudoHyperbolicMap) -> float:
    """s(g) = max(||g_<||, ||g_>^{-1}||) in N0 operator norms."""
    less = np.linalg.norm(g.g_less, 2)
    more_inv = 1.0 / scipy.linalg.svdvals(g.g_more).min()
    return float(max(less, more_inv))


def strength_decay(g: PseudoHyperbolicMap, powers: Sequence[int]) -> List[StrengthSample]:
    """s(g^n) next to rho(g_<)^n for each requested n."""
    samples = []
    rho = g.spectral_radius_less
    for n in powers:
        if n < 1:
            raise ValueError(f"powers must be positive, got {n}")
        power = _assemble(g.frame, np.linalg.matrix_power(g.g_less, n))
        s = power.strength
        rho_n = rho ** n
        samples.append(StrengthSample(n, s, rho_n, s / rho_n if rho_n > 0 else np.inf))
    return samples


def _dominant_subspace(
    apply: LinearAction,
    dim: int,
    rank: int,
    max_iter: int,
    seed: int = 0,
) -> np.ndarray:
    """Orthogonal iteration for the dominant `rank`-dimensional invariant subspace."""
    start = np.random.default_rng(seed).standard_normal((dim, rank))
    X, _ = np.linalg.qr(start)
    for _ in range(max_iter):
        Y = apply(X)
        if not np.all(np.isfinite(Y)):
            raise NotPseudohyperbolicError("iteration produced non-finite values")
        X_next, _ = np.linalg.qr(Y)
        change = np.linalg.norm(X_next - X @ (X.T @ X_next))
        X = X_next
        if change < 1e-12:
            break
    return X


def _rayleigh_block(apply: LinearAction, X: np.ndarray):
    """g restricted to span(X) for Euclidean-orthonormal X, and the invariance residual."""
    image = apply(X)
    block = X.T @ image
    residual = np.linalg.norm(image - X @ block) / max(np.linalg.norm(image), np.finfo(float).tiny)
    return block, float(residual)


def _restriction(
    ctx: SpaceContext, apply: LinearAction, B: np.ndarray, label: str
) -> np.ndarray:
    image = apply(B)
    block = B.T @ ctx.gram_N0 @ image
    residual = np.linalg.norm(image - B @ block) / max(np.linalg.norm(image), np.finfo(float).tiny)
    if residual > TOLERANCE:
        raise NotPseudohyperbolicError(f"{label} is not invariant (residual {residual:.3e})")
    return block


def extract_pseudohyperbolic(
    ctx: SpaceContext,
    forward: LinearAction,
    backward: LinearAction,
    det_value: float,
    max_iter: int = 500,
    band: float = MODULUS_BAND,
) -> PseudoHyperbolicMap:
    """
    Classify a product known only through its action, without forming
    its (possibly huge) matrix.

    Moduli on the dominant subspaces are read off before their invariance
    is checked, since a modulus within `band` of 1 stalls the iteration.
    As in spectral_split, moduli within the rank tolerance of 1 count as 1.

    Args:
        ctx: Space context
        forward: x -> g x on columns
        backward: x -> g^{-1} x on columns
        det_value: det g (product of the determinants of the factors)
        max_iter: Orthogonal-iteration budget per subspace
        band: Modulus band around 1

    Returns:
        PseudoHyperbolicMap with the recovered frame and dynamical part

    Raises:
        NotPseudohyperbolicError: With the reason the product fails
        InconclusiveSpectrumError: If a dominant modulus lies within band of 1
    """
    d = ctx.d
    dominant = {
        "g_>": (forward, _dominant_subspace(forward, ctx.dim, d, max_iter)),
        "g_<^-1": (backward, _dominant_subspace(backward, ctx.dim, d, max_iter)),
    }
    for label, (apply, X) in dominant.items():
        block, residual = _rayleigh_block(apply, X)
        smallest = float(np.abs(np.linalg.eigvals(block)).min())
        offset = abs(smallest - 1.0)
        if TOLERANCE < offset <= band:
            raise InconclusiveSpectrumError(
                f"{label} has an eigenvalue of modulus {smallest:.9f}, within {band} of 1"
            )
        if residual > TOLERANCE:
            raise NotPseudohyperbolicError(
                f"dominant subspace of {label} is not invariant (residual {residual:.3e})"
            )
        if smallest <= 1.0 + band:
            raise NotPseudohyperbolicError(
                f"{label} has an eigenvalue of modulus {smallest:.9f}, expected > 1"
            )

    try:
        V_more = map_from_mtis(ctx, dominant["g_>"][1])
        V_less = map_from_mtis(ctx, dominant["g_<^-1"][1])
        frame = build_frame(V_less, V_more)
    except AffineSchottkyError as e:
        raise NotPseudohyperbolicError(f"dominant subspaces do not form a frame: {e}") from e

    C = _restriction(ctx, forward, frame.V_more.basis, "V_>")
    A_inv = _restriction(ctx, backward, frame.V_less.basis, "V_<")
    eq_eigenvalue = det_value * np.linalg.det(A_inv) / np.linalg.det(C)
    if abs(eq_eigenvalue - 1.0) > band:
        raise NotPseudohyperbolicError(
            f"eigenvalue on V_= is {eq_eigenvalue:+.9f}, expected +1"
        )
    return _assemble(frame, np.linalg.inv(A_inv))
