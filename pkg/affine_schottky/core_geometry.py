"""
Ambient Quadratic Space
The space R^{d+1,d}, its positive/negative splitting S + T, the global and
frame-local Euclidean structures, and the angular metrics built on them.

Vectors are plain float arrays of length 2d+1. Batched helpers take arrays
of shape (k, 2d+1) with one vector per row.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Dict, Optional, Union

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateFrameError,
    DimensionMismatchError,
    EmptyRegionError,
    EvenDimensionError,
    IndefiniteFormError,
    SpecValidationError,
    ZeroVectorError,
)

logger = logging.getLogger("SpaceGeometry")

# Relative tolerance for rank, orthonormality and isotropy tests.
TOLERANCE = 1e-8

PointSampler = Callable[[np.random.Generator, int], np.ndarray]


class FormKind(Enum):
    """Which bilinear form a FormHandle carries."""
    Q = "Q"
    N0 = "N0"
    NV = "NV"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class FormHandle:
    """A symmetric bilinear form given by its Gram matrix in ambient coordinates."""

    kind: FormKind
    gram: np.ndarray

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @cached_property
    def cholesky(self) -> np.ndarray:
        """Lower factor L with gram = L L^T.

        Raises:
            IndefiniteFormError: If the form is Q or not positive definite.
        """
        if self.kind is FormKind.Q:
            raise IndefiniteFormError("Q has signature (d+1, d) and is not a metric")
        try:
            return np.linalg.cholesky(self.gram)
        except np.linalg.LinAlgError as e:
            raise IndefiniteFormError(
                f"{self.kind.value} form is not positive definite: {e}"
            ) from e

    def unwhiten(self, Y: np.ndarray) -> np.ndarray:
        return scipy.linalg.solve_triangular(self.cholesky.T, Y, lower=False)

    def norms(self, X: np.ndarray) -> np.ndarray:
        """Norms of the rows of X."""
        X = np.atleast_2d(X)
        return np.linalg.norm(X @ self.cholesky, axis=1)


def custom_form(gram: np.ndarray) -> FormHandle:
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise DimensionMismatchError(f"Gram matrix must be square, got shape {gram.shape}")
    return FormHandle(FormKind.CUSTOM, 0.5 * (gram + gram.T))


@dataclass(frozen=True, eq=False)
class SpaceContext:
    """
    The quadratic space R^{d+1,d} with a fixed splitting S + T.

    basis_S holds d+1 columns with Q = identity on them, basis_T holds d
    columns with Q = -identity, and S is Q-orthogonal to T. N0 is the
    Euclidean structure making basis_S and basis_T orthonormal together.
    """

    d: int
    gram_Q: np.ndarray
    basis_S: np.ndarray
    basis_T: np.ndarray
    orientation_S: int = 1
    orientation_T: int = 1
    allow_even: bool = False

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise SpecValidationError(f"d must be a positive integer, got {self.d}")
        if self.d % 2 == 0 and not self.allow_even:
            raise EvenDimensionError(
                f"d={self.d} is even: positive wings of transversal subspaces always meet"
            )
        if self.orientation_S not in (1, -1) or self.orientation_T not in (1, -1):
            raise SpecValidationError("orientations must be +1 or -1")

        dim = 2 * self.d + 1
        gram = np.array(self.gram_Q, dtype=float)
        basis_S = np.array(self.basis_S, dtype=float)
        basis_T = np.array(self.basis_T, dtype=float)
        if gram.shape != (dim, dim):
            raise DimensionMismatchError(f"gram_Q must be {dim}x{dim}, got {gram.shape}")
        if basis_S.shape != (dim, self.d + 1) or basis_T.shape != (dim, self.d):
            raise DimensionMismatchError(
                f"basis_S must be {dim}x{self.d + 1} and basis_T {dim}x{self.d}, "
                f"got {basis_S.shape} and {basis_T.shape}"
            )

        scale = max(1.0, np.abs(gram).max())
        if np.abs(gram - gram.T).max() > TOLERANCE * scale:
            raise SpecValidationError("gram_Q is not symmetric")
        checks = {
            "Q on S": (basis_S.T @ gram @ basis_S, np.eye(self.d + 1)),
            "Q on T": (basis_T.T @ gram @ basis_T, -np.eye(self.d)),
            "Q between S and T": (basis_S.T @ gram @ basis_T, np.zeros((self.d + 1, self.d))),
        }
        for label, (value, expected) in checks.items():
            defect = np.abs(value - expected).max()
            if defect > TOLERANCE * scale:
                raise SpecValidationError(
                    f"{label} deviates from the normalized splitting by {defect:.3e}"
                )

        for name, value in (("gram_Q", gram), ("basis_S", basis_S), ("basis_T", basis_T)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def standard(
        cls,
        d: int,
        orientation_S: int = 1,
        orientation_T: int = 1,
        allow_even: bool = False,
    ) -> "SpaceContext":
        """Coordinate splitting: the first d+1 axes span S, the last d span T."""
        dim = 2 * d + 1
        gram = np.diag(np.concatenate([np.ones(d + 1), -np.ones(d)]))
        eye = np.eye(dim)
        return cls(
            d=d,
            gram_Q=gram,
            basis_S=eye[:, : d + 1],
            basis_T=eye[:, d + 1:],
            orientation_S=orientation_S,
            orientation_T=orientation_T,
            allow_even=allow_even,
        )

    @property
    def dim(self) -> int:
        return 2 * self.d + 1

    @cached_property
    def change_of_basis(self) -> np.ndarray:
        return np.hstack([self.basis_S, self.basis_T])

    @cached_property
    def _inverse_change_of_basis(self) -> np.ndarray:
        return np.linalg.inv(self.change_of_basis)

    @cached_property
    def gram_N0(self) -> np.ndarray:
        inv = self._inverse_change_of_basis
        return inv.T @ inv

    @cached_property
    def gram_Q_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.gram_Q)

    @cached_property
    def projector_S(self) -> np.ndarray:
        return self.basis_S @ self._inverse_change_of_basis[: self.d + 1]

    @cached_property
    def projector_T(self) -> np.ndarray:
        return self.basis_T @ self._inverse_change_of_basis[self.d + 1:]

    @cached_property
    def sigma(self) -> np.ndarray:
        """The involution Id_S + (-Id_T)."""
        return self.projector_S - self.projector_T

    def form_Q(self) -> FormHandle:
        return FormHandle(FormKind.Q, self.gram_Q)

    def form_N0(self) -> FormHandle:
        return FormHandle(FormKind.N0, self.gram_N0)

    def coordinates(self, X: np.ndarray) -> np.ndarray:
        """Coordinates of the columns of X in the basis (basis_S, basis_T)."""
        return self._inverse_change_of_basis @ X

    def subspace(self, vectors: np.ndarray) -> "Subspace":
        """Span of the columns of `vectors`, with an N0-orthonormal basis."""
        return Subspace(orthonormalize(vectors, self.gram_N0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": int(self.d),
            "gram_Q": self.gram_Q.tolist(),
            "basis_S": self.basis_S.tolist(),
            "basis_T": self.basis_T.tolist(),
            "orientation_S": int(self.orientation_S),
            "orientation_T": int(self.orientation_T),
        }


@dataclass(frozen=True, eq=False)
class Subspace:
    """A linear subspace given by a basis orthonormal for the form it was built with."""

    basis: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim == 1:
            basis = basis[:, None]
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def orthonormalize(
    vectors: np.ndarray,
    gram: Optional[np.ndarray] = None,
    rtol: float = TOLERANCE,
) -> np.ndarray:
    """Orthonormal basis (for `gram`) of the span of the columns of `vectors`."""
    M = np.asarray(vectors, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.shape[1] == 0:
        return M.copy()
    if gram is None:
        return scipy.linalg.orth(M, rcond=rtol)
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as e:
        raise IndefiniteFormError(f"cannot orthonormalize for an indefinite form: {e}") from e
    U = scipy.linalg.orth(L.T @ M, rcond=rtol)
    return scipy.linalg.solve_triangular(L.T, U, lower=False)


def eval_form(ctx: SpaceContext, form: FormHandle, x: np.ndarray, y: np.ndarray) -> float:
    """Value of the bilinear form on (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (ctx.dim,) or y.shape != (ctx.dim,):
        raise DimensionMismatchError(
            f"eval_form expects two vectors of length {ctx.dim}, got {x.shape} and {y.shape}"
        )
    if form.dim != ctx.dim:
        raise DimensionMismatchError(f"form has dimension {form.dim}, space has {ctx.dim}")
    return float(x @ form.gram @ y)


def split_ST(ctx: SpaceContext, x: np.ndarray):
    """Q-orthogonal decomposition x = s + t with s in S and t in T."""
    x = np.asarray(x, dtype=float)
    if x.shape != (ctx.dim,):
        raise DimensionMismatchError(f"expected a vector of length {ctx.dim}, got {x.shape}")
    s = ctx.projector_S @ x
    return s, x - s


def angle(form: FormHandle, x: np.ndarray, y: np.ndarray, projective: bool = False) -> float:
    """
    Angle between two nonzero vectors for a Euclidean form.

    Args:
        form: Positive definite form (N0, N_V or custom)
        x, y: Nonzero vectors
        projective: Compare the lines Rx, Ry instead of the rays

    Returns:
        Angle in [0, pi], or in [0, pi/2] for the projective variant

    Raises:
        ZeroVectorError: If x or y is zero
        IndefiniteFormError: If the form is Q
    """
    L = form.cholesky
    xw = L.T @ np.asarray(x, dtype=float)
    yw = L.T @ np.asarray(y, dtype=float)
    nx, ny = np.linalg.norm(xw), np.linalg.norm(yw)
    if nx == 0.0 or ny == 0.0:
        raise ZeroVectorError("angle is undefined for the zero vector")
    xw, yw = xw / nx, yw / ny
    # 2*atan2 keeps precision near 0 and near pi
    value = 2.0 * np.arctan2(np.linalg.norm(xw - yw), np.linalg.norm(xw + yw))
    if projective:
        value = min(value, np.pi - value)
    return float(value)


def principal_angles(form: FormHandle, A: Subspace, B: Subspace) -> np.ndarray:
    """Principal angles between A and B in ascending order."""
    if A.dim == 0 or B.dim == 0:
        raise DimensionMismatchError("principal angles need nonzero subspaces")
    L = form.cholesky
    Ua = scipy.linalg.orth(L.T @ A.basis)
    Ub = scipy.linalg.orth(L.T @ B.basis)
    if Ua.shape[1] == 0 or Ub.shape[1] == 0:
        raise DimensionMismatchError("principal angles need nonzero subspaces")
    if Ua.shape[1] < Ub.shape[1]:
        Ua, Ub = Ub, Ua

    C = Ua.T @ Ub
    cosines = np.clip(scipy.linalg.svd(C, compute_uv=False), 0.0, 1.0)
    sines = np.clip(scipy.linalg.svd(Ub - Ua @ C, compute_uv=False), 0.0, 1.0)
    cos_desc = np.sort(cosines)[::-1]
    sin_asc = np.sort(sines)[: cos_desc.size]
    # arcsin for small angles, arccos for large ones
    angles = np.where(
        sin_asc < np.sqrt(0.5), np.arcsin(sin_asc), np.arccos(cos_desc)
    )
    return np.sort(angles)


def subspace_min_angle(form: FormHandle, A: Subspace, B: Subspace) -> float:
    """Smallest principal angle between A and B."""
    return float(principal_angles(form, A, B)[0])


def subspace_hausdorff_angle(form: FormHandle, A: Subspace, B: Subspace) -> float:
    """Largest principal angle between two subspaces of equal dimension."""
    if A.dim != B.dim:
        raise DimensionMismatchError(
            f"Hausdorff angle needs equal dimensions, got {A.dim} and {B.dim}"
        )
    return float(principal_angles(form, A, B)[-1])


def sample_sphere(
    rng: np.random.Generator,
    count: int,
    dim: int,
    form: Optional[FormHandle] = None,
) -> np.ndarray:
    """Rows uniformly distributed on the unit sphere of `form` (Euclidean by default)."""
    Y = rng.standard_normal((count, dim))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    if form is None:
        return Y
    return form.unwhiten(Y.T).T


def _draw(source: Union[np.ndarray, PointSampler], rng: np.random.Generator, count: int) -> np.ndarray:
    if callable(source):
        points = np.asarray(source(rng, count), dtype=float)
    else:
        points = np.asarray(source, dtype=float)
    return np.atleast_2d(points)


def set_min_angle(
    form: FormHandle,
    P: Union[np.ndarray, PointSampler],
    Q: Union[np.ndarray, PointSampler],
    samples: int = 2000,
    seed: int = 0,
    chunk: int = 1024,
) -> float:
    """
    Sampled infimum of the angle between two sets of directions.

    Each set is either an array of points (rows) or a sampler called as
    sampler(rng, count). The result is an upper bound on the true infimum.

    Raises:
        EmptyRegionError: If a set has no nonzero point
    """
    rng = np.random.default_rng(seed)
    L = form.cholesky
    sets = []
    for label, source in (("P", P), ("Q", Q)):
        W = _draw(source, rng, samples) @ L
        norms = np.linalg.norm(W, axis=1)
        W = W[norms > 0] / norms[norms > 0, None]
        if W.shape[0] == 0:
            raise EmptyRegionError(f"point set {label} produced no nonzero vector")
        sets.append(W)
    Pw, Qw = sets

    best_cos, best_pair = -2.0, (0, 0)
    for start in range(0, Pw.shape[0], chunk):
        block = Pw[start:start + chunk] @ Qw.T
        idx = np.unravel_index(np.argmax(block), block.shape)
        if block[idx] > best_cos:
            best_cos = block[idx]
            best_pair = (start + idx[0], idx[1])
    x, y = Pw[best_pair[0]], Qw[best_pair[1]]
    return float(2.0 * np.arctan2(np.linalg.norm(x - y), np.linalg.norm(x + y)))


def lipschitz_constant_NV(ctx: SpaceContext, frame) -> float:
    """
    C(V) = max(||Id||_{N0 -> N_V}, ||Id||_{N_V -> N0}).

    Args:
        ctx: Space context
        frame: Any object exposing `local_form` (a Frame)

    Returns:
        The constant C(V); angular metrics of N0 and N_V are C(V)^2-equivalent
    """
    gram_V = frame.local_form.gram
    if gram_V.shape != ctx.gram_N0.shape:
        raise DimensionMismatchError("frame and context dimensions differ")
    ratios = scipy.linalg.eigh(gram_V, ctx.gram_N0, eigvals_only=True)
    if ratios.min() <= 0.0 or not np.all(np.isfinite(ratios)):
        raise DegenerateFrameError("local form of the frame is degenerate")
    return float(max(np.sqrt(ratios.max()), 1.0 / np.sqrt(ratios.min())))
