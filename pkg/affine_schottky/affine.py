"""
Affine Deformations
Translation parts, cone domains H_i^sigma(t), the fundamental domain H0,
point tracing through the tiling, the gap sequence along a trace and the
angle-control identities used by it.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .core_geometry import TOLERANCE, SpaceContext, Subspace, lipschitz_constant_NV, subspace_hausdorff_angle
from .errors import CenterEquationError, DimensionMismatchError, UncertifiedError
from .mtis import mtis_from_map, random_orthogonal_map, wing_contains, wing_pair_angle
from .pseudohyperbolic import invert
from .schottky import (
    SchottkyGroup,
    Side,
    sample_tennis_domain,
    tennis_membership_batch,
    wing_distance,
)
from .words import Letter, Word

logger = logging.getLogger("TileTracer")

# Boundary band: |y| * |angular margin| <= BOUNDARY_TOL * (1 + |x|).
BOUNDARY_TOL = 1e-7
DIVERGENCE_NORM = 1e12


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> linear x + translation."""

    linear: np.ndarray
    translation: np.ndarray

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.linear.T + self.translation

    def inverse(self, ctx: SpaceContext) -> "AffineMap":
        linear_inv = invert(ctx, self.linear)
        return AffineMap(linear_inv, -linear_inv @ self.translation)


def solve_center(g: np.ndarray, t: np.ndarray) -> np.ndarray:
    """
    The fixed point data u with u + g(u) = t.

    Raises:
        CenterEquationError: If Id + g is numerically singular
    """
    g = np.asarray(g, dtype=float)
    t = np.asarray(t, dtype=float)
    if t.shape != (g.shape[0],):
        raise DimensionMismatchError(f"translation must have length {g.shape[0]}, got {t.shape}")
    system = np.eye(g.shape[0]) + g
    condition = np.linalg.cond(system)
    if not np.isfinite(condition) or condition > 1.0 / TOLERANCE:
        raise CenterEquationError(f"Id + g is numerically singular (cond {condition:.3e})")
    u = np.linalg.solve(system, t)
    residual = np.linalg.norm(system @ u - t)
    if residual > TOLERANCE * (1.0 + np.linalg.norm(t)):
        raise CenterEquationError(f"center equation residual {residual:.3e}")
    return u


class RegionKind(Enum):
    H0 = "H0"
    TILDE = "tilde"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class PointClassification:
    kind: RegionKind
    region: Optional[Tuple[int, int]] = None
    claimants: List[Tuple[int, int]] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class InTReport:
    inside: bool
    d_min: float
    asymptotic_gap: float
    reason: str
    witness: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "inside": self.inside,
            "d_min": self.d_min,
            "asymptotic_gap": self.asymptotic_gap,
            "reason": self.reason,
            "witness": self.witness,
        }


@dataclass(frozen=True, eq=False)
class AffineDeformation:
    """G(t): linear parts g_i of the group, translations t_i and centers u_i."""

    group: SchottkyGroup
    translations: np.ndarray
    centers: np.ndarray
    in_t: Optional[InTReport] = None

    @property
    def ctx(self) -> SpaceContext:
        return self.group.ctx

    @property
    def n(self) -> int:
        return self.group.n

    @cached_property
    def gammas(self) -> List[AffineMap]:
        return [AffineMap(g.matrix, t) for g, t in zip(self.group.generators, self.translations)]

    @cached_property
    def gamma_inverses(self) -> List[AffineMap]:
        return [gamma.inverse(self.ctx) for gamma in self.gammas]

    def letter_map(self, letter: Letter) -> AffineMap:
        return self.gammas[letter.index] if letter.sign == 1 else self.gamma_inverses[letter.index]

    def domains(self) -> List[Tuple[int, int]]:
        return [(i, s) for i in range(self.n) for s in (1, -1)]

    def with_admissibility(self, report: InTReport) -> "AffineDeformation":
        return replace(self, in_t=report)


def build_deformation(group: SchottkyGroup, translations: Sequence[np.ndarray]) -> AffineDeformation:
    """Solve u_i + g_i(u_i) = t_i for every generator."""
    T = np.array(translations, dtype=float)
    if T.shape != (group.n, group.ctx.dim):
        raise DimensionMismatchError(
            f"expected {group.n} translations of length {group.ctx.dim}, got shape {T.shape}"
        )
    U = np.array([solve_center(g.matrix, t) for g, t in zip(group.generators, T)])
    T.setflags(write=False)
    U.setflags(write=False)
    return AffineDeformation(group, T, U)


def canonical_translations(group: SchottkyGroup) -> np.ndarray:
    """t0 = (2 e_{1,=}, ..., 2 e_{n,=}); then u_i = e_{i,=}."""
    return np.array([2.0 * g.frame.e_eq for g in group.generators])


def _cone_margin(deformation: AffineDeformation, i: int, sigma: int, X: np.ndarray):
    """Shifted points y = x - sigma u_i and their angular margin eps_i - distance."""
    Y = X - sigma * deformation.centers[i]
    frame = deformation.group.generators[i].frame
    eps = deformation.group.radii[i]
    norms = deformation.ctx.form_N0().norms(Y)
    safe = np.where(norms[:, None] > 0, Y, 1.0)
    margin = eps - wing_distance(frame, Side.of(sigma), safe)
    return Y, norms, margin


def cone_membership_batch(
    deformation: AffineDeformation, i: int, sigma: int, X: np.ndarray, closed: bool = False
) -> np.ndarray:
    """Rows of X in H_i^sigma(t) (open) or its closure; the apex belongs to the closure only."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X - sigma * deformation.centers[i]
    at_apex = ~np.any(Y, axis=1)
    frame = deformation.group.generators[i].frame
    member = tennis_membership_batch(frame, deformation.group.radii[i], Y, Side.of(sigma), closed)
    return np.where(at_apex, closed, member)


def cone_membership(
    deformation: AffineDeformation, i: int, sigma: int, x: np.ndarray, closed: bool = False
) -> bool:
    return bool(cone_membership_batch(deformation, i, sigma, x, closed)[0])


@dataclass(frozen=True, eq=False)
class ClassificationBatch:
    kinds: np.ndarray
    claims: np.ndarray
    boundary: np.ndarray
    domains: List[Tuple[int, int]]

    def region_of(self, k: int) -> Optional[Tuple[int, int]]:
        hits = np.flatnonzero(self.claims[k])
        return self.domains[hits[0]] if hits.size else None


def _tilde_claims(deformation: AffineDeformation, i: int, sigma: int, X: np.ndarray, boundary_tol: float):
    """Claims of H~_i^sigma and the boundary band around it."""
    if sigma == -1:
        Y, norms, margin = _cone_margin(deformation, i, -1, X)
        claims = (margin > 0) & (norms > 0)
    else:
        # H~_i^+ = gamma_i(complement of closure(H_i^-))
        Z = deformation.gamma_inverses[i](X)
        Y, norms, margin = _cone_margin(deformation, i, -1, Z)
        claims = margin < 0
        X = Z
    scale = 1.0 + np.linalg.norm(X, axis=1)
    band = (norms * np.abs(margin) <= boundary_tol * scale) | (norms <= boundary_tol * scale)
    return claims & ~band, band


def classify_points(
    deformation: AffineDeformation, X: np.ndarray, boundary_tol: float = BOUNDARY_TOL
) -> ClassificationBatch:
    """Which of H0, H~_i^sigma or a boundary band each row of X lies in."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    domains = deformation.domains()
    claims = np.zeros((X.shape[0], len(domains)), dtype=bool)
    boundary = np.zeros(X.shape[0], dtype=bool)
    for k, (i, sigma) in enumerate(domains):
        claim, band = _tilde_claims(deformation, i, sigma, X, boundary_tol)
        claims[:, k] = claim
        boundary |= band
    kinds = np.where(
        boundary,
        RegionKind.BOUNDARY.value,
        np.where(claims.any(axis=1), RegionKind.TILDE.value, RegionKind.H0.value),
    )
    return ClassificationBatch(kinds, claims, boundary, domains)


def classify_point(
    deformation: AffineDeformation, x: np.ndarray, boundary_tol: float = BOUNDARY_TOL
) -> PointClassification:
    batch = classify_points(deformation, x, boundary_tol)
    kind = RegionKind(batch.kinds[0])
    claimants = [batch.domains[k] for k in np.flatnonzero(batch.claims[0])]
    region = claimants[0] if kind is RegionKind.TILDE else None
    return PointClassification(kind, region, claimants)


class TraceStatus(Enum):
    LANDED = "landed"
    BUDGET_EXHAUSTED = "budget_exhausted"
    DIVERGED = "diverged"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class GapEntry:
    k: int
    a_k: float
    delta_k: float
    cyclic: bool
    unbounded: bool


@dataclass(frozen=True, eq=False)
class GapReport:
    entries: List[GapEntry]
    relabeled: bool

    @property
    def monotone(self) -> bool:
        heights = [e.a_k for e in self.entries]
        scale = 1.0 + max((abs(h) for h in heights), default=0.0)
        return all(b >= a - 1e-9 * scale for a, b in zip(heights, heights[1:]))

    @property
    def delta_floor(self) -> float:
        deltas = [e.delta_k for e in self.entries if e.cyclic and np.isfinite(e.delta_k)]
        return min(deltas) if deltas else float("nan")


@dataclass(frozen=True, eq=False)
class TileTrace:
    x0: np.ndarray
    letters: List[Letter]
    points: List[np.ndarray]
    status: TraceStatus
    boundary_step: Optional[int] = None
    gaps: Optional[GapReport] = None

    @property
    def word(self) -> Word:
        return Word(tuple(self.letters))


def trace_point(
    deformation: AffineDeformation,
    x0: np.ndarray,
    max_steps: int = 60,
    boundary_tol: float = BOUNDARY_TOL,
    gap_rays: int = 0,
    seed: int = 0,
) -> TileTrace:
    """
    Pull x0 back through the tiling: while the point lies in H~_i^sigma,
    record (i, sigma) and apply gamma_i^{-sigma}. The recorded word names
    the tile gamma^[k](H0) containing x0. With gap_rays > 0 the gap
    sequence of the trace is attached.
    """
    x = np.asarray(x0, dtype=float)
    if x.shape != (deformation.ctx.dim,):
        raise DimensionMismatchError(f"expected a point of length {deformation.ctx.dim}, got {x.shape}")
    letters: List[Letter] = []
    points = [x]
    status = TraceStatus.BUDGET_EXHAUSTED
    boundary_step = None
    for step in range(max_steps + 1):
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            status = TraceStatus.DIVERGED
            break
        result = classify_point(deformation, x, boundary_tol)
        if result.kind is RegionKind.BOUNDARY:
            status, boundary_step = TraceStatus.BOUNDARY, step
            break
        if result.kind is RegionKind.H0:
            status = TraceStatus.LANDED
            break
        if step == max_steps:
            break
        i, sigma = result.region
        letter = Letter(i, sigma)
        if letters and letter == letters[-1].inverse():
            logger.warning(f"Trace produced a non-reduced step {letters[-1]}{letter}")
        letters.append(letter)
        x = deformation.letter_map(letter.inverse())(x)
        points.append(x)
    trace = TileTrace(np.asarray(x0, dtype=float), letters, points, status, boundary_step)
    if gap_rays > 0 and letters:
        trace = replace(trace, gaps=gap_sequence(deformation, trace, rays=gap_rays, seed=seed))
    return trace


def _prefix_member(deformation: AffineDeformation, prefix: Sequence[Letter], nxt: Letter, P: np.ndarray) -> np.ndarray:
    """Rows of P in gamma^[k](H~_next), tested by pulling back through the prefix."""
    with np.errstate(over="ignore", invalid="ignore"):
        Z = P
        for letter in prefix:
            Z = deformation.letter_map(letter.inverse())(Z)
        finite = np.all(np.isfinite(Z), axis=1)
        Z = np.where(finite[:, None], Z, 0.0)
        claims, _ = _tilde_claims(deformation, nxt.index, nxt.sign, Z, 0.0)
    return claims & finite


def gap_sequence(
    deformation: AffineDeformation,
    trace: TileTrace,
    rays: int = 64,
    seed: int = 0,
    grid_points: int = 60,
    bisection_steps: int = 40,
) -> GapReport:
    """
    Support heights a_k of gamma^[k](H~_{i_{k+1}}) n (x0 + S) along the
    half-line direction Delta = S n V_>^L of the first letter, and their gaps.

    Heights are last exits along a shared fan of downward rays in x0 + S:
    the furthest radius of a common geometric grid still inside the region
    is refined by bisection, so the region need not be star-shaped from x0.
    Pieces thinner than the grid spacing can still be missed.
    """
    ctx = deformation.ctx
    letters = trace.letters
    if not letters:
        return GapReport([], False)
    if trace.status is not TraceStatus.LANDED:
        logger.info(f"Gap sequence of a {trace.status.value} trace is partial")

    first = letters[0]
    relabeled = first != Letter(0, 1)
    if relabeled:
        logger.debug(f"Gap sequence relabels {first} as the first generator")
    frame = deformation.group.generators[first.index].frame
    top = frame if first.sign == 1 else frame.swapped()
    V = top.V_more

    line = scipy.linalg.null_space(V.basis.T @ ctx.gram_Q @ ctx.basis_S)
    delta_hat = ctx.basis_S @ line[:, 0]
    delta_hat /= np.sqrt(delta_hat @ ctx.gram_N0 @ delta_hat)
    if not wing_contains(top.wing_more, delta_hat):
        delta_hat = -delta_hat

    rng = np.random.default_rng(seed)
    W = rng.standard_normal((rays, ctx.d + 1)) @ ctx.basis_S.T
    W /= ctx.form_N0().norms(W)[:, None]
    slope = W @ ctx.gram_N0 @ delta_hat
    W[slope > 0] *= -1.0
    drop = np.abs(slope)

    x0 = trace.x0
    scale = 1.0 + np.linalg.norm(x0) + np.max(np.linalg.norm(deformation.centers, axis=1))
    radii = np.geomspace(1e-4 * scale, 1e3 * scale, grid_points)

    entries = []
    previous = None
    for k, nxt in enumerate(letters):
        prefix = letters[:k]
        grid = x0 + radii[None, :, None] * W[:, None, :]
        member = _prefix_member(deformation, prefix, nxt, grid.reshape(-1, ctx.dim)).reshape(rays, grid_points)
        last_in = np.where(member.any(axis=1), grid_points - 1 - member[:, ::-1].argmax(axis=1), -1)
        unbounded = bool(np.any(last_in == grid_points - 1))

        active = last_in < grid_points - 1
        lo = np.where(last_in >= 0, radii[np.maximum(last_in, 0)], 0.0)
        hi = np.where(active, radii[np.minimum(last_in + 1, grid_points - 1)], radii[-1])
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            inside = _prefix_member(deformation, prefix, nxt, x0 + mid[:, None] * W)
            lo = np.where(active & inside, mid, lo)
            hi = np.where(active & ~inside, mid, hi)
        heights = -hi * drop
        a_k = float(np.min(heights))
        delta_k = float(a_k - previous) if previous is not None else float("nan")
        cyclic = k == 1 or (k > 1 and letters[k - 1] != letters[0].inverse())
        entries.append(GapEntry(k, a_k, delta_k, bool(cyclic), unbounded))
        previous = a_k
    return GapReport(entries, relabeled)


def cone_boundary_cloud(deformation: AffineDeformation, i: int, sigma: int, rng, count: int, radius: float) -> np.ndarray:
    """Boundary points of the closed cone inside the ball of the given radius, apex included."""
    frame = deformation.group.generators[i].frame
    eps = deformation.group.radii[i]
    D = sample_tennis_domain(frame, Side.of(sigma), rng, count, (eps, eps))
    D /= deformation.ctx.form_N0().norms(D)[:, None]
    r = rng.uniform(0.0, radius, count)
    apex = sigma * deformation.centers[i]
    return np.vstack([apex[None, :], apex + r[:, None] * D])


def in_T(
    deformation: AffineDeformation,
    samples: int = 2000,
    seed: int = 0,
    radius_factor: float = 10.0,
) -> InTReport:
    """
    Whether the 2n closed cones H_i^sigma(t) are pairwise disjoint, and
    their sampled minimal distance d_min.

    Far from the origin the cones are separated by the angular gap of the
    sphere domains; inside a ball of radius radius_factor (1 + max |u_i|)
    distances are measured on sampled boundary clouds.
    """
    group = deformation.group
    ctx = deformation.ctx
    N0 = ctx.form_N0()
    domains = deformation.domains()

    constants = [lipschitz_constant_NV(ctx, g.frame) for g in group.generators]
    asymptotic = min(
        wing_pair_angle(group.domain_wing(i, Side.of(s)), group.domain_wing(j, Side.of(t)), N0)
        - constants[i] ** 2 * group.radii[i]
        - constants[j] ** 2 * group.radii[j]
        for (i, s), (j, t) in combinations(domains, 2)
    )

    for (i, s) in domains:
        apex = s * deformation.centers[i]
        for (j, t) in domains:
            if (j, t) != (i, s) and cone_membership(deformation, j, t, apex, closed=True):
                return InTReport(False, 0.0, float(asymptotic), f"apex of H_{i}^{s:+d} lies in closure of H_{j}^{t:+d}",
                                 {"domains": [[i, s], [j, t]], "point": apex.tolist()})
    if asymptotic <= 0:
        return InTReport(False, 0.0, float(asymptotic), "sphere domains are not separated")

    radius = radius_factor * (1.0 + np.max(np.linalg.norm(deformation.centers, axis=1)))
    rng = np.random.default_rng([seed, 23])
    clouds = {dom: cone_boundary_cloud(deformation, dom[0], dom[1], rng, samples, radius) for dom in domains}
    L = N0.cholesky

    d_min = np.inf
    witness = None
    for a, b in combinations(domains, 2):
        overlap_a = cone_membership_batch(deformation, b[0], b[1], clouds[a], closed=True)
        overlap_b = cone_membership_batch(deformation, a[0], a[1], clouds[b], closed=True)
        if overlap_a.any() or overlap_b.any():
            point = clouds[a][np.argmax(overlap_a)] if overlap_a.any() else clouds[b][np.argmax(overlap_b)]
            return InTReport(False, 0.0, float(asymptotic), f"closed cones {a} and {b} overlap",
                             {"domains": [list(a), list(b)], "point": point.tolist()})
        D = cdist(clouds[a] @ L, clouds[b] @ L)
        k = np.unravel_index(np.argmin(D), D.shape)
        if D[k] < d_min:
            d_min = float(D[k])
            witness = {"domains": [list(a), list(b)], "points": [clouds[a][k[0]].tolist(), clouds[b][k[1]].tolist()]}

    inside = d_min > 0
    marker = "[OK]" if inside else "[FAILED]"
    logger.info(f"{marker} admissible translations: d_min={d_min:.6g}, angular gap={asymptotic:.6g}")
    return InTReport(bool(inside), float(d_min), float(asymptotic), "ok" if inside else "cones touch", witness)


def verify_affine_ping_pong(
    deformation: AffineDeformation, samples: int = 10_000, seed: int = 0, radius_factor: float = 10.0
) -> Dict[str, Any]:
    """gamma_i(complement of closure(H_i^-)) lies in H_i^+, on points of a large ball."""
    ctx = deformation.ctx
    radius = radius_factor * (1.0 + np.max(np.linalg.norm(deformation.centers, axis=1)))
    results = []
    for i, gamma in enumerate(deformation.gammas):
        rng = np.random.default_rng([seed, 31, i])
        X = rng.standard_normal((samples, ctx.dim))
        X *= (radius * rng.random(samples) ** (1.0 / ctx.dim) / np.linalg.norm(X, axis=1))[:, None]
        _, norms, margin = _cone_margin(deformation, i, -1, X)
        band = norms * np.abs(margin) <= BOUNDARY_TOL * (1.0 + np.linalg.norm(X, axis=1))
        X = X[(margin < 0) & ~band]
        images = gamma(X)
        inside = cone_membership_batch(deformation, i, 1, images)
        results.append({"generator": i, "samples": int(X.shape[0]), "violations": int(np.sum(~inside))})
    return {"passed": all(r["violations"] == 0 for r in results), "generators": results}


def quotient_report(deformation: AffineDeformation) -> Dict[str, Any]:
    """
    Combinatorial summary of the quotient handlebody.

    Raises:
        UncertifiedError: Unless the group is certified and t is admissible
    """
    if not deformation.group.certified:
        raise UncertifiedError("quotient report needs a certified group")
    if deformation.in_t is None or not deformation.in_t.inside:
        raise UncertifiedError("quotient report needs admissible translations")
    n = deformation.n
    return {
        "dimension": deformation.ctx.dim,
        "handles": n,
        "identifications": [
            {"generator": i, "glues": f"∂H̃_{i}^- → ∂H̃_{i}^+"} for i in range(n)
        ],
    }


def q_orthogonal_complement(ctx: SpaceContext, V: Subspace) -> Subspace:
    """V^perp for Q, as sigma applied to the N0-orthogonal complement."""
    complement = scipy.linalg.null_space(V.basis.T @ ctx.gram_N0)
    if complement.shape[1] == 0:
        return Subspace(np.zeros((ctx.dim, 0)))
    return ctx.subspace(ctx.sigma @ complement)


def _sine_to(ctx: SpaceContext, x: np.ndarray, basis: np.ndarray) -> float:
    """sin of the N0 angle between x and a subspace (N0-orthonormal basis)."""
    G = ctx.gram_N0
    residual = x - basis @ (basis.T @ G @ x)
    return float(np.sqrt(max(residual @ G @ residual, 0.0) / (x @ G @ x)))


def verify_angle_control(ctx: SpaceContext, samples: int = 100, seed: int = 0) -> Dict[str, Any]:
    """
    On random maximal isotropic subspaces: the Q-complement preserves
    Hausdorff angles, and sin alpha(x, V' n S) = sqrt(2) sin alpha(x, V')
    for V' = V^perp and x in S.
    """
    rng = np.random.default_rng(seed)
    N0 = ctx.form_N0()
    worst_i = 0.0
    worst_ii = 0.0
    for _ in range(samples):
        V = mtis_from_map(ctx, random_orthogonal_map(ctx.d, rng))
        W = mtis_from_map(ctx, random_orthogonal_map(ctx.d, rng))
        lhs = subspace_hausdorff_angle(N0, q_orthogonal_complement(ctx, V.subspace), q_orthogonal_complement(ctx, W.subspace))
        rhs = subspace_hausdorff_angle(N0, V.subspace, W.subspace)
        worst_i = max(worst_i, abs(lhs - rhs))

        V_prime = q_orthogonal_complement(ctx, V.subspace)
        line = scipy.linalg.null_space(V.basis.T @ ctx.gram_Q @ ctx.basis_S)
        V_prime_S = ctx.subspace(ctx.basis_S @ line)
        x = ctx.basis_S @ rng.standard_normal(ctx.d + 1)
        deviation = abs(_sine_to(ctx, x, V_prime_S.basis) - np.sqrt(2.0) * _sine_to(ctx, x, V_prime.basis))
        worst_ii = max(worst_ii, deviation)

    passed = worst_i <= 1e-8 and worst_ii <= 1e-8
    marker = "[OK]" if passed else "[FAILED]"
    logger.info(f"{marker} angle control: deviations {worst_i:.3e} and {worst_ii:.3e} over {samples} draws")
    return {
        "passed": bool(passed),
        "draws": samples,
        "max_deviation_complement": float(worst_i),
        "max_deviation_sine": float(worst_ii),
    }
