"""
Exterior Powers
Compound matrices on the d-th exterior power, induced forms, proximality
analysis, projective Lipschitz estimates and the pseudohyperbolic/proximal
correspondence checks.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .core_geometry import (
    FormHandle,
    SpaceContext,
    Subspace,
    angle,
    custom_form,
    orthonormalize,
    principal_angles,
    subspace_hausdorff_angle,
)
from .errors import DimensionMismatchError, EmptyRegionError, NotProximalError
from .mtis import Frame
from .pseudohyperbolic import MODULUS_BAND, PseudoHyperbolicMap

logger = logging.getLogger("ExteriorPower")

POWER_MAX_ITER = 10_000
POWER_RTOL = 1e-12


@dataclass(frozen=True)
class ExtIndex:
    """A basis element e_I of the exterior power, I sorted and 0-based."""

    subset: Tuple[int, ...]

    @property
    def label(self) -> str:
        return "^".join(f"e{i + 1}" for i in self.subset)


@lru_cache(maxsize=None)
def _index_array(dim: int, k: int) -> np.ndarray:
    idx = np.array(list(combinations(range(dim), k)), dtype=int).reshape(-1, k)
    idx.setflags(write=False)
    return idx


def ext_basis(dim: int, k: int) -> List[ExtIndex]:
    """Lexicographically ordered k-subsets of {0, ..., dim-1}."""
    return [ExtIndex(tuple(int(i) for i in row)) for row in _index_array(dim, k)]


def compound_matrix(M: np.ndarray, k: int) -> np.ndarray:
    """k-th compound: entry (I, J) is the minor of M on rows I and columns J."""
    M = np.asarray(M, dtype=float)
    rows = _index_array(M.shape[0], k)
    cols = _index_array(M.shape[1], k)
    blocks = M[rows[:, None, :, None], cols[None, :, None, :]]
    return np.linalg.det(blocks)


def wedge(vectors: np.ndarray) -> np.ndarray:
    """Coordinates of x_1 ^ ... ^ x_k (columns of `vectors`) in the lexicographic basis."""
    X = np.asarray(vectors, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    idx = _index_array(X.shape[0], X.shape[1])
    return np.linalg.det(X[idx, :])


@dataclass(frozen=True, eq=False)
class ExtOperator:
    matrix: np.ndarray
    source: np.ndarray
    d: int

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def ext_operator(ctx: SpaceContext, g: np.ndarray) -> ExtOperator:
    """Lambda^d g."""
    g = np.asarray(g, dtype=float)
    if g.shape != (ctx.dim, ctx.dim):
        raise DimensionMismatchError(f"expected a {ctx.dim}x{ctx.dim} matrix, got {g.shape}")
    return ExtOperator(compound_matrix(g, ctx.d), g, ctx.d)


def ext_form(ctx: SpaceContext, form: FormHandle) -> FormHandle:
    """
    Lambda^d N: <x_1^..^x_d, y_1^..^y_d> = det(<x_i, y_j>_N).

    Raises:
        IndefiniteFormError: If N is not positive definite
    """
    form.cholesky
    return custom_form(compound_matrix(form.gram, ctx.d))


@dataclass(frozen=True, eq=False)
class ProximalData:
    top_eigenvalue: float
    V_s: Subspace
    V_u: Subspace
    separation: float
    strength: float
    form: FormHandle
    iterations: int

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class NotProximal:
    leading_moduli: Tuple[float, ...]
    reason: str

    def __bool__(self) -> bool:
        return False


def _power_iteration(F: np.ndarray, max_iter: int, seed: int = 0):
    v = np.random.default_rng(seed).standard_normal(F.shape[0])
    v /= np.linalg.norm(v)
    lam = float(v @ F @ v)
    for iteration in range(1, max_iter + 1):
        y = F @ v
        lam_next = float(v @ y)
        v_next = y / np.linalg.norm(y)
        if v_next @ v < 0:
            v_next = -v_next
        converged = (
            abs(lam_next - lam) <= POWER_RTOL * abs(lam_next)
            and np.linalg.norm(v_next - v) <= POWER_RTOL
        )
        v, lam = v_next, lam_next
        if converged:
            return v, float(v @ F @ v), iteration
    logger.warning(f"Power iteration stopped after {max_iter} iterations without converging")
    return v, float(v @ F @ v), max_iter


def _restricted_norm(F: np.ndarray, basis: np.ndarray, form: FormHandle) -> float:
    Z = orthonormalize(basis, form.gram)
    return float(scipy.linalg.svdvals(form.cholesky.T @ F @ Z)[0])


def analyze_proximal(
    f: Union[ExtOperator, np.ndarray],
    form: Optional[FormHandle] = None,
    frame: Optional[Frame] = None,
    band: float = MODULUS_BAND,
    max_iter: int = POWER_MAX_ITER,
) -> Union[ProximalData, NotProximal]:
    """
    Attracting line, repelling hyperplane and strength of a proximal map.

    Args:
        f: Linear map (an ExtOperator or a plain square matrix)
        form: Euclidean form for angles and norms (default: the dot product)
        frame: Frame of the pseudohyperbolic map f comes from, if any; its
            repelling hyperplane is then read off the frame
        band: Required relative gap between the two leading moduli
        max_iter: Power-iteration budget

    Returns:
        ProximalData, or NotProximal carrying the two leading moduli
    """
    F = f.matrix if isinstance(f, ExtOperator) else np.asarray(f, dtype=float)
    n = F.shape[0]
    if form is None:
        form = custom_form(np.eye(n))
    moduli = np.sort(np.abs(np.linalg.eigvals(F)))[::-1]
    leading = tuple(float(m) for m in moduli[:2])
    if moduli[0] == 0.0:
        return NotProximal(leading, "map is nilpotent")
    if n > 1 and moduli[0] < (1.0 + band) * moduli[1]:
        return NotProximal(leading, f"leading moduli {leading[0]:.9g} and {leading[1]:.9g} are tied")

    v, lam, iterations = _power_iteration(F, max_iter)
    if frame is not None:
        V_u = repulsing_hyperplane_from_frame(frame)
    else:
        w, _, _ = _power_iteration(F.T, max_iter)
        V_u = Subspace(scipy.linalg.null_space(w[None, :]))

    V_s = Subspace(v)
    separation = float(principal_angles(form, V_s, V_u)[0])
    strength = _restricted_norm(F, V_u.basis, form) / abs(lam)
    return ProximalData(lam, V_s, V_u, separation, strength, form, iterations)


def repulsing_hyperplane_from_frame(frame: Frame) -> Subspace:
    """V_u(Lambda^d g) = {x : x ^ Lambda^{d+1} V_<= = 0}."""
    ctx = frame.ctx
    d = ctx.d
    omega = wedge(frame.V_leq.basis)
    complement_position = {tuple(J): k for k, J in enumerate(_index_array(ctx.dim, d + 1))}
    functional = np.empty(_index_array(ctx.dim, d).shape[0])
    everything = set(range(ctx.dim))
    for k, I in enumerate(_index_array(ctx.dim, d)):
        I_c = sorted(everything.difference(I))
        parity = sum(sum(1 for j in I_c if j < i) for i in I)
        functional[k] = (-1) ** parity * omega[complement_position[tuple(I_c)]]
    return Subspace(scipy.linalg.null_space(functional[None, :]))


class LipschitzRegion(Enum):
    OUTSIDE_REPELLING = "outside_ball_V_u"
    NEAR_ATTRACTING = "ball_V_s"


def _region_points(
    rng: np.random.Generator,
    count: int,
    center: np.ndarray,
    complement: np.ndarray,
    r_low: float,
    r_high: float,
    around_line: bool,
) -> np.ndarray:
    """
    Unit rows at distance r in [r_low, r_high] from a line (around_line) or
    from the hyperplane orthogonal to `center`.
    """
    r = rng.uniform(r_low, r_high, count)
    h = rng.standard_normal((count, complement.shape[1])) @ complement.T
    h /= np.linalg.norm(h, axis=1, keepdims=True)
    if around_line:
        return np.cos(r)[:, None] * center + np.sin(r)[:, None] * h
    return np.sin(r)[:, None] * center + np.cos(r)[:, None] * h


def _projective_angles(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    X = X / np.linalg.norm(X, axis=1, keepdims=True)
    Y = Y / np.linalg.norm(Y, axis=1, keepdims=True)
    spherical = 2.0 * np.arctan2(np.linalg.norm(X - Y, axis=1), np.linalg.norm(X + Y, axis=1))
    return np.minimum(spherical, np.pi - spherical)


def lipschitz_on_set(
    f: Union[ExtOperator, np.ndarray],
    data: ProximalData,
    region: LipschitzRegion,
    zeta: float,
    samples: int = 100_000,
    seed: int = 0,
) -> float:
    """
    Sampled supremum of alpha(f x, f y) / alpha(x, y) over pairs in a region of P(E).

    The value is a lower bound on the true supremum. Half of the pairs are
    close together (difference quotient near the derivative), half are
    independent draws.

    Raises:
        EmptyRegionError: If the region contains no sampled pair
    """
    F = f.matrix if isinstance(f, ExtOperator) else np.asarray(f, dtype=float)
    form = data.form
    L = form.cholesky
    # whitened coordinates: the form becomes the dot product
    F_w = L.T @ F @ np.linalg.inv(L.T)
    n = F.shape[0]

    if region is LipschitzRegion.NEAR_ATTRACTING:
        center = L.T @ data.V_s.basis[:, 0]
        around_line, r_low, r_high = True, 0.0, zeta
    else:
        hyperplane = orthonormalize(L.T @ data.V_u.basis)
        center = scipy.linalg.null_space(hyperplane.T)[:, 0]
        around_line, r_low, r_high = False, zeta, np.pi / 2
    if r_high <= r_low:
        raise EmptyRegionError(f"region {region.value} with radius {zeta} is empty")
    center = center / np.linalg.norm(center)
    complement = scipy.linalg.null_space(center[None, :])

    def distance(X):
        X = X / np.linalg.norm(X, axis=1, keepdims=True)
        if around_line:
            return np.arccos(np.clip(np.abs(X @ center), 0.0, 1.0))
        return np.arcsin(np.clip(np.abs(X @ center), 0.0, 1.0))

    rng = np.random.default_rng(seed)
    half = max(samples // 2, 1)
    X = _region_points(rng, half, center, complement, r_low, r_high, around_line)
    Y_near = X + 1e-3 * rng.standard_normal((half, n))
    X_far = _region_points(rng, half, center, complement, r_low, r_high, around_line)
    Y_far = _region_points(rng, half, center, complement, r_low, r_high, around_line)
    P = np.vstack([X, X_far])
    R = np.vstack([Y_near, Y_far])

    dist_R = distance(R)
    keep = (dist_R >= r_low) & (dist_R <= r_high)
    P, R = P[keep], R[keep]
    base = _projective_angles(P, R)
    keep = base > 1e-12
    if not np.any(keep):
        raise EmptyRegionError(f"no usable pair sampled in region {region.value}")
    images = _projective_angles(P[keep] @ F_w.T, R[keep] @ F_w.T)
    return float(np.max(images / base[keep]))


@dataclass(frozen=True, eq=False)
class ProximalSystemAudit:
    maps: List[Dict[str, ProximalData]]
    separation: float
    strength: float
    pairwise_angles: List[Dict[str, Any]] = field(default_factory=list)


def audit_proximal_system(
    maps: Sequence[Union[ExtOperator, np.ndarray]],
    form: Optional[FormHandle] = None,
) -> ProximalSystemAudit:
    """
    Check that {f_i, f_i^{-1}} is a proximal system and measure eta(F), s(F).

    Raises:
        NotProximalError: Naming the first member without a simple dominant eigenvalue
    """
    analyses: Dict[Tuple[int, int], ProximalData] = {}
    for i, f in enumerate(maps):
        F = f.matrix if isinstance(f, ExtOperator) else np.asarray(f, dtype=float)
        for sigma, matrix in ((1, F), (-1, np.linalg.inv(F))):
            result = analyze_proximal(matrix, form)
            if not result:
                raise NotProximalError(f"map {i} with sign {sigma:+d} is not proximal: {result.reason}")
            analyses[(i, sigma)] = result

    table = []
    for (i, s), source in analyses.items():
        for (j, t), target in analyses.items():
            if (j, t) == (i, -s):
                continue
            value = float(principal_angles(source.form, source.V_s, target.V_u)[0])
            table.append({"source": [i, s], "target": [j, t], "angle": value})

    separation = min(entry["angle"] for entry in table)
    strength = max(data.strength for data in analyses.values())
    logger.info(f"Proximal system: eta={separation:.6f}, s_hat={strength:.3e}, {len(table)} pairs")
    return ProximalSystemAudit(
        maps=[{"plus": analyses[(i, 1)], "minus": analyses[(i, -1)]} for i in range(len(maps))],
        separation=separation,
        strength=strength,
        pairwise_angles=table,
    )


@dataclass(frozen=True)
class SandwichSample:
    hausdorff: float
    wedge_angle: float
    upper: float

    @property
    def holds(self) -> bool:
        return self.hausdorff <= self.wedge_angle + 1e-12 and self.wedge_angle <= self.upper + 1e-12


@dataclass(frozen=True)
class CorrespondenceReport:
    proximal: bool
    attracting_angle: float
    strength_local: float
    inverse_expanding_norm: float
    top_modulus: float
    det_more: float
    repelling_angle: float
    sandwich: List[SandwichSample]

    @property
    def strength_gap(self) -> float:
        return abs(self.strength_local - self.inverse_expanding_norm)

    @property
    def sandwich_holds(self) -> bool:
        return all(sample.holds for sample in self.sandwich)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "proximal": self.proximal,
            "attracting_angle": self.attracting_angle,
            "strength_local": self.strength_local,
            "inverse_expanding_norm": self.inverse_expanding_norm,
            "top_modulus": self.top_modulus,
            "det_more": self.det_more,
            "repelling_angle": self.repelling_angle,
            "sandwich_holds": self.sandwich_holds,
            "sandwich_samples": len(self.sandwich),
        }


def random_subspace_pairs(ctx: SpaceContext, count: int, seed: int = 0) -> List[Tuple[Subspace, Subspace]]:
    """Pairs of random d-dimensional subspaces, the second a perturbation of the first."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        A = rng.standard_normal((ctx.dim, ctx.d))
        B = A + rng.uniform(0.01, 1.0) * rng.standard_normal((ctx.dim, ctx.d))
        pairs.append((ctx.subspace(A), ctx.subspace(B)))
    return pairs


def check_correspondence(
    g: PseudoHyperbolicMap,
    pairs: Optional[Sequence[Tuple[Subspace, Subspace]]] = None,
    seed: int = 0,
    draws: int = 100,
) -> CorrespondenceReport:
    """
    Compare g with Lambda^d g: proximality, attracting line, strength in
    Lambda^d N_V and the Hausdorff/wedge angle sandwich.
    """
    ctx = g.ctx
    d = ctx.d
    ext = ext_operator(ctx, g.matrix)
    N0_ext = ext_form(ctx, ctx.form_N0())
    NV_ext = ext_form(ctx, g.frame.local_form)

    local = analyze_proximal(ext, NV_ext, frame=g.frame)
    generic = analyze_proximal(ext, N0_ext)
    inverse_norm = float(1.0 / scipy.linalg.svdvals(g.g_more).min())
    det_more = float(abs(np.linalg.det(g.g_more)))
    if not local or not generic:
        return CorrespondenceReport(
            False, float("nan"), float("nan"), inverse_norm, float("nan"), det_more, float("nan"), []
        )

    attracting = angle(N0_ext, local.V_s.basis[:, 0], wedge(g.frame.V_more.basis), projective=True)
    repelling = subspace_hausdorff_angle(custom_form(np.eye(ext.size)), local.V_u, generic.V_u)

    if pairs is None:
        pairs = random_subspace_pairs(ctx, draws, seed)
    sandwich = []
    for A, B in pairs:
        alpha_1 = subspace_hausdorff_angle(ctx.form_N0(), A, B)
        alpha_2 = angle(N0_ext, wedge(A.basis), wedge(B.basis), projective=True)
        sandwich.append(SandwichSample(alpha_1, alpha_2, np.sqrt(d) * alpha_1))

    report = CorrespondenceReport(
        proximal=True,
        attracting_angle=float(attracting),
        strength_local=local.strength,
        inverse_expanding_norm=inverse_norm,
        top_modulus=abs(local.top_eigenvalue),
        det_more=det_more,
        repelling_angle=float(repelling),
        sandwich=sandwich,
    )
    logger.debug(
        f"Correspondence: s_hat={report.strength_local:.6e} vs ||g_>^-1||={inverse_norm:.6e}"
    )
    return report

