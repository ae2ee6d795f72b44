"""
Schottky Groups
Framesets, tennis-ball domains on the sphere, sampled ping-pong
certification, radii selection and the audit of long products.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import reduce
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .core_geometry import (
    TOLERANCE,
    SpaceContext,
    lipschitz_constant_NV,
    sample_sphere,
    set_min_angle,
    subspace_hausdorff_angle,
)
from .errors import (
    InconclusiveSpectrumError,
    NotPseudohyperbolicError,
    NotTransversalError,
    SpecValidationError,
    ZeroVectorError,
)
from .mtis import (
    Frame,
    MtisRep,
    Wing,
    build_frame,
    generate_transversal_family,
    is_transversal,
    positive_wing,
    wing_angle,
    wing_pair_angle,
)
from .pseudohyperbolic import (
    MIN_RHO_GAP,
    MODULUS_BAND,
    PseudoHyperbolicMap,
    build_pseudohyperbolic,
    extract_pseudohyperbolic,
)
from .words import Letter, Word, WordMode, enumerate_words

logger = logging.getLogger("SchottkyCertifier")

# Relative slack of the ratio inequalities defining tennis-ball domains.
BOUNDARY_RTOL = 1e-12


class Side(Enum):
    """Tennis-ball domain around the wing of V_> (PLUS) or of V_< (MINUS)."""
    PLUS = 1
    MINUS = -1

    @classmethod
    def of(cls, sigma: int) -> "Side":
        return cls.PLUS if sigma > 0 else cls.MINUS

    @property
    def opposite(self) -> "Side":
        return Side.MINUS if self is Side.PLUS else Side.PLUS


@dataclass(frozen=True, eq=False)
class Frameset:
    components: List[MtisRep]
    pairing: List[Tuple[int, int]]
    frames: List[Frame]
    pair_separations: Dict[Tuple[int, int], float]

    @property
    def ctx(self) -> SpaceContext:
        return self.components[0].ctx

    @property
    def n(self) -> int:
        return len(self.frames)

    @property
    def separation(self) -> float:
        """epsilon(W): minimum over all pairs of components."""
        return min(self.pair_separations.values())

    def wing(self, i: int, side: Side) -> Wing:
        frame = self.frames[i]
        return frame.wing_more if side is Side.PLUS else frame.wing_less


def build_frameset(mtis_list: Sequence[MtisRep], pairing: Sequence[Sequence[int]]) -> Frameset:
    """
    Pair 2n pairwise transversal subspaces into n frames (V_<, V_>) = (pair[0], pair[1]).

    Raises:
        SpecValidationError: If the pairing is not a perfect matching of the components
        NotTransversalError: Naming the first non-transversal pair of components
    """
    components = list(mtis_list)
    pairs = [tuple(int(k) for k in pair) for pair in pairing]
    used = sorted(k for pair in pairs for k in pair)
    if any(len(pair) != 2 for pair in pairs) or used != list(range(len(components))):
        raise SpecValidationError(
            f"pairing {pairs} must use each of the {len(components)} components exactly once"
        )

    ctx = components[0].ctx
    wings = [positive_wing(ctx, V) for V in components]
    separations = {}
    for a, b in combinations(range(len(components)), 2):
        check = is_transversal(components[a], components[b])
        if not check:
            raise NotTransversalError(
                f"components {a} and {b} are not transversal (margin {check.margin:.3e})"
            )
        separations[(a, b)] = wing_pair_angle(wings[a], wings[b], ctx.form_N0())

    frames = [build_frame(components[a], components[b]) for a, b in pairs]
    for i, frame in enumerate(frames):
        if not frame.sign_identities_hold:
            logger.warning(f"Frame {i}: -e_= is not in the wing of V_<")
    frameset = Frameset(components, pairs, frames, separations)
    logger.info(f"Frameset with {frameset.n} frames, separation {frameset.separation:.6f} rad")
    return frameset


def _ratio_parts(frame: Frame, side: Side, X: np.ndarray):
    """(numerator, denominator) of the tennis-ball ratio: tan(distance to the wing)."""
    a_less, c, a_more = frame.components(X)
    n_less = np.linalg.norm(a_less, axis=1)
    n_more = np.linalg.norm(a_more, axis=1)
    if side is Side.MINUS:
        n_less, n_more, c = n_more, n_less, -c
    toward = c >= 0
    numerator = np.where(toward, n_less, np.hypot(n_less, c))
    denominator = np.where(toward, np.hypot(n_more, c), n_more)
    return numerator, denominator


def wing_distance(frame: Frame, side: Side, X: np.ndarray) -> np.ndarray:
    """N_V angular distance from each row of X to the wing on `side`."""
    numerator, denominator = _ratio_parts(frame, side, np.atleast_2d(X))
    return np.arctan2(numerator, denominator)


def tennis_membership_batch(
    frame: Frame, eps: float, X: np.ndarray, side: Side, closed: bool = False
) -> np.ndarray:
    """Row-wise membership in the (closed) tennis-ball domain; zero rows are never members."""
    X = np.atleast_2d(X)
    numerator, denominator = _ratio_parts(frame, side, X)
    bound = np.tan(eps) * denominator
    if closed:
        member = numerator <= bound * (1.0 + BOUNDARY_RTOL)
    else:
        member = numerator < bound * (1.0 - BOUNDARY_RTOL)
    return member & (np.abs(X).max(axis=1) > 0)


def tennis_membership(
    frame: Frame, eps: float, x: np.ndarray, side: Side, closed: bool = False
) -> bool:
    """
    x_= >= 0 and |x_<| / |x_> + x_=| < tan(eps), or x_= <= 0 and
    |x_< + x_=| / |x_>| < tan(eps) (plus side; the minus side is symmetric).

    Raises:
        ZeroVectorError: If x is zero
        SpecValidationError: If eps is not in (0, pi/2)
    """
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        raise ZeroVectorError("tennis-ball membership is undefined at 0")
    if not 0.0 < eps < np.pi / 2:
        raise SpecValidationError(f"eps must lie in (0, pi/2), got {eps}")
    return bool(tennis_membership_batch(frame, eps, x[None, :], side, closed)[0])


def sample_tennis_domain(
    frame: Frame,
    side: Side,
    rng: np.random.Generator,
    count: int,
    phi_range: Tuple[float, float],
) -> np.ndarray:
    """
    Rows at N_V angular distance phi (uniform in phi_range) from the wing on `side`.

    Half of the rows sit over the interior of the wing, half over its
    boundary V, where the normal cone also contains the -e_= direction.
    """
    d = frame.d
    e_unit = frame.e_eq / frame.eq_norm
    if side is Side.PLUS:
        near, far, apex = frame.V_more.basis, frame.V_less.basis, e_unit
    else:
        near, far, apex = frame.V_less.basis, frame.V_more.basis, -e_unit

    phi = rng.uniform(phi_range[0], phi_range[1], count)
    z = rng.standard_normal((count, d))
    over_interior = rng.random(count) < 0.5

    # wing point, N_V-unit
    a = np.where(over_interior, np.abs(rng.standard_normal(count)), 0.0)
    w = (z @ near.T + a[:, None] * apex) / np.sqrt(np.sum(z ** 2, axis=1) + a ** 2)[:, None]

    # unit normal direction
    u_far = rng.standard_normal((count, d))
    u_apex = np.where(over_interior, 0.0, -np.abs(rng.standard_normal(count)))
    scale = np.sqrt(np.sum(u_far ** 2, axis=1) + u_apex ** 2)
    u = (u_far @ far.T + u_apex[:, None] * apex) / scale[:, None]
    return w + np.tan(phi)[:, None] * u


@dataclass(frozen=True)
class Tan4Check:
    holds: bool
    margin: float


def check_tan4_bound(g: PseudoHyperbolicMap, eps: float) -> Tan4Check:
    """s(g) < tan(eps)^4: the explicit sufficient condition for ping-pong."""
    bound = np.tan(eps) ** 4
    return Tan4Check(bool(g.strength < bound), float(bound - g.strength))


def choose_radii(frameset: Frameset, eps: float) -> List[float]:
    """
    eps_i = (eps / 3) / C(V_i)^2, so that N_V-balls of radius eps_i around a
    wing sit inside N0-balls of radius eps / 3.
    """
    if not 0.0 < eps <= np.pi / 2:
        raise SpecValidationError(f"eps must lie in (0, pi/2], got {eps}")
    ctx = frameset.ctx
    return [float((eps / 3.0) / lipschitz_constant_NV(ctx, frame) ** 2) for frame in frameset.frames]


@dataclass(frozen=True, eq=False)
class CertificationReport:
    ping_pong: Dict[str, Any]
    disjointness: Dict[str, Any]
    tan4: List[Dict[str, Any]]
    radii_inclusion: Optional[Dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return bool(self.ping_pong["passed"] and self.disjointness["passed"])


@dataclass(frozen=True, eq=False)
class SchottkyGroup:
    frameset: Frameset
    generators: List[PseudoHyperbolicMap]
    radii: List[float]
    epsilon: float
    certification: Optional[CertificationReport] = None

    @property
    def ctx(self) -> SpaceContext:
        return self.frameset.ctx

    @property
    def n(self) -> int:
        return len(self.generators)

    @property
    def strength(self) -> float:
        """s(G) = max_i s(g_i)."""
        return max(g.strength for g in self.generators)

    @property
    def certified(self) -> bool:
        return self.certification is not None and self.certification.passed

    def letter_matrix(self, letter: Letter) -> np.ndarray:
        g = self.generators[letter.index]
        return g.matrix if letter.sign == 1 else g.inverse_matrix

    def letter_determinant(self, letter: Letter) -> float:
        det = self.generators[letter.index].determinant
        return det if letter.sign == 1 else 1.0 / det

    def word_matrix(self, word: Word) -> np.ndarray:
        return reduce(np.matmul, (self.letter_matrix(letter) for letter in word), np.eye(self.ctx.dim))

    def domain_wing(self, i: int, side: Side) -> Wing:
        return self.frameset.wing(i, side)


def build_schottky_group(
    frameset: Frameset,
    dynamical_parts: Sequence[np.ndarray],
    epsilon: float,
    radii: Optional[Sequence[float]] = None,
    min_rho_gap: float = MIN_RHO_GAP,
    tol: float = TOLERANCE,
) -> SchottkyGroup:
    """
    Generators g_i with frame i and dynamical part dynamical_parts[i].

    Raises:
        SpecValidationError: On a count mismatch or radii outside (0, pi/2)
        ContractionError: If a dynamical part is not contracting
    """
    if len(dynamical_parts) != frameset.n:
        raise SpecValidationError(
            f"expected {frameset.n} dynamical parts, got {len(dynamical_parts)}"
        )
    generators = [
        build_pseudohyperbolic(frame, A, min_rho_gap, tol)
        for frame, A in zip(frameset.frames, dynamical_parts)
    ]
    if radii is None:
        radii = choose_radii(frameset, epsilon)
    radii = [float(r) for r in radii]
    if len(radii) != frameset.n or not all(0.0 < r < np.pi / 2 for r in radii):
        raise SpecValidationError(f"radii {radii} must be {frameset.n} values in (0, pi/2)")
    return SchottkyGroup(frameset, generators, radii, float(epsilon))


def build_group(
    ctx: SpaceContext,
    n: int,
    thetas: Optional[Sequence[float]],
    pairing: Sequence[Sequence[int]],
    dynamical_parts: Sequence[np.ndarray],
    epsilon: float,
    radii: Optional[Sequence[float]] = None,
    min_rho_gap: float = MIN_RHO_GAP,
    tol: float = TOLERANCE,
) -> SchottkyGroup:
    """Rotation family, frameset and generators in one step."""
    family = generate_transversal_family(ctx, n, thetas)
    return build_schottky_group(
        build_frameset(family, pairing), dynamical_parts, epsilon, radii, min_rho_gap, tol
    )


def heuristic_strength(radii: Sequence[float]) -> float:
    """Starting strength tan(min eps_i)^4 / 10."""
    return float(np.tan(min(radii)) ** 4 / 10.0)


def _outside_closed(
    ctx: SpaceContext, frame: Frame, eps: float, side: Side, rng: np.random.Generator, count: int
) -> np.ndarray:
    """Uniform sphere samples outside the closed domain, by rejection."""
    form = ctx.form_N0()
    kept = []
    total = 0
    for _ in range(100):
        X = sample_sphere(rng, max(count, 64), ctx.dim, form)
        X = X[~tennis_membership_batch(frame, eps, X, side, closed=True)]
        kept.append(X)
        total += X.shape[0]
        if total >= count:
            break
    return np.vstack(kept)[:count]


def verify_ping_pong_sphere(group: SchottkyGroup, samples: int = 10_000, seed: int = 0) -> Dict[str, Any]:
    """
    g_i^sigma maps the complement of closure(H_i^{-sigma}) into H_i^sigma.

    Half of the source points are uniform on the sphere, half lie within
    2 eps_i outside the boundary of the source domain. Margins are
    eps_i minus the N_V distance of the image to the target wing.
    """
    ctx = group.ctx
    results = []
    passed = True
    for i, g in enumerate(group.generators):
        frame, eps = g.frame, group.radii[i]
        for sigma_idx, sigma in enumerate((1, -1)):
            rng = np.random.default_rng([seed, i, sigma_idx])
            target, source = Side.of(sigma), Side.of(-sigma)
            uniform = _outside_closed(ctx, frame, eps, source, rng, samples - samples // 2)
            boundary = sample_tennis_domain(
                frame, source, rng, samples // 2, (eps, min(3.0 * eps, 1.5))
            )
            # drop draws that rounded onto the closed boundary
            boundary = boundary[~tennis_membership_batch(frame, eps, boundary, source, closed=True)]
            X = np.vstack([uniform, boundary])
            matrix = g.matrix if sigma == 1 else g.inverse_matrix
            images = X @ matrix.T
            margins = eps - wing_distance(frame, target, images)
            inside = tennis_membership_batch(frame, eps, images, target, closed=False)
            worst = int(np.argmin(margins))
            ok = bool(np.all(inside) and margins[worst] > 0)
            passed &= ok
            entry = {
                "generator": i,
                "sign": sigma,
                "samples": int(X.shape[0]),
                "worst_margin": float(margins[worst]),
                "passed": ok,
                "witness": None if ok else X[worst].tolist(),
                "verdict": f"sampled, margin {margins[worst]:.6g}, {X.shape[0]} samples",
            }
            marker = "[OK]" if ok else "[FAILED]"
            logger.info(
                f"{marker} ping-pong g_{i}^{sigma:+d}: worst margin {margins[worst]:.6g} over {X.shape[0]} samples"
            )
            results.append(entry)
    return {"passed": passed, "generators": results}


def _nearest_neighbor_resolution(X: np.ndarray) -> float:
    D = cdist(X, X)
    np.fill_diagonal(D, np.inf)
    return float(np.mean(D.min(axis=1)))


def check_domain_disjointness(group: SchottkyGroup, samples: int = 1000, seed: int = 0) -> Dict[str, Any]:
    """
    Pairwise disjointness of the 2n closed domains.

    Certified bound: wing separation - C_a^2 eps_a - C_b^2 eps_b. Sampled
    check: boundary points of each domain are outside every other closed
    domain, with the sampled distance well above the sampling resolution.
    """
    ctx = group.ctx
    N0 = ctx.form_N0()
    count = min(samples, 1000)
    domains = [(i, side) for i in range(group.n) for side in (Side.PLUS, Side.MINUS)]
    constants = [lipschitz_constant_NV(ctx, g.frame) for g in group.generators]

    clouds = {}
    resolution = 0.0
    for k, (i, side) in enumerate(domains):
        rng = np.random.default_rng([seed, 7, k])
        X = sample_tennis_domain(group.generators[i].frame, side, rng, count, (group.radii[i], group.radii[i]))
        X = X / N0.norms(X)[:, None]
        clouds[(i, side)] = X
        resolution = max(resolution, _nearest_neighbor_resolution(X @ N0.cholesky))

    pairs = []
    passed = True
    for (i, s), (j, t) in combinations(domains, 2):
        separation = wing_pair_angle(group.domain_wing(i, s), group.domain_wing(j, t), N0)
        bound = separation - constants[i] ** 2 * group.radii[i] - constants[j] ** 2 * group.radii[j]
        cross = int(
            np.sum(tennis_membership_batch(group.generators[j].frame, group.radii[j], clouds[(i, s)], t, closed=True))
            + np.sum(tennis_membership_batch(group.generators[i].frame, group.radii[i], clouds[(j, t)], s, closed=True))
        )
        sampled = set_min_angle(N0, clouds[(i, s)], clouds[(j, t)])
        ok = bound > 0 or (cross == 0 and sampled > 10.0 * resolution)
        passed &= ok
        pairs.append({
            "domains": [[i, s.value], [j, t.value]],
            "certified_bound": float(bound),
            "sampled_distance": float(sampled),
            "cross_members": cross,
            "passed": bool(ok),
        })
    lower = min(p["certified_bound"] for p in pairs) if pairs else float("inf")
    marker = "[OK]" if passed else "[FAILED]"
    logger.info(f"{marker} domain disjointness: certified lower bound {lower:.6g}")
    return {
        "passed": bool(passed),
        "certified_lower_bound": float(lower),
        "resolution": float(resolution),
        "pairs": pairs,
    }


def check_radii_inclusion(
    frameset: Frameset, radii: Sequence[float], eps: float, samples: int = 10_000, seed: int = 0
) -> Dict[str, Any]:
    """Boundary points of B_{N_V}(wing, eps_i) lie in B_{N0}(wing, eps / 3)."""
    ctx = frameset.ctx
    N0 = ctx.form_N0()
    worst = 0.0
    for i, frame in enumerate(frameset.frames):
        for k, side in enumerate((Side.PLUS, Side.MINUS)):
            rng = np.random.default_rng([seed, 11, i, k])
            X = sample_tennis_domain(frame, side, rng, samples, (radii[i], radii[i]))
            wing = frame.wing_more if side is Side.PLUS else frame.wing_less
            worst = max(worst, float(wing_angle(wing, X, N0).max()))
    limit = eps / 3.0
    return {"passed": bool(worst <= limit + 1e-12), "max_distance": worst, "limit": limit}


def certify(group: SchottkyGroup, samples: int = 10_000, seed: int = 0) -> SchottkyGroup:
    """Run the sphere certification and return the group carrying its report."""
    logger.info("=" * 70)
    logger.info(f"Certifying group: d={group.ctx.d}, n={group.n}, s(G)={group.strength:.3e}")
    logger.info("=" * 70)
    tan4 = []
    for i, g in enumerate(group.generators):
        check = check_tan4_bound(g, group.radii[i])
        tan4.append({"generator": i, "holds": check.holds, "margin": check.margin})
    report = CertificationReport(
        ping_pong=verify_ping_pong_sphere(group, samples, seed),
        disjointness=check_domain_disjointness(group, samples, seed),
        tan4=tan4,
        radii_inclusion=check_radii_inclusion(group.frameset, group.radii, group.epsilon, min(samples, 2000), seed),
    )
    return replace(group, certification=report)


@dataclass(frozen=True)
class WordAudit:
    word: str
    pseudohyperbolic: bool
    reason: str
    separation: float
    strength: float
    hausdorff_ratio: float
    identity_distance: float
    passed: bool
    inconclusive: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "word": self.word,
            "pseudohyperbolic": self.pseudohyperbolic,
            "reason": self.reason,
            "separation": self.separation,
            "strength": self.strength,
            "hausdorff_ratio": self.hausdorff_ratio,
            "identity_distance": self.identity_distance,
            "passed": self.passed,
            "inconclusive": self.inconclusive,
        }


@dataclass(frozen=True, eq=False)
class ProductAudit:
    entries: List[WordAudit] = field(default_factory=list)
    separation_floor: float = 0.0

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    @property
    def failures(self) -> List[WordAudit]:
        return [entry for entry in self.entries if not entry.passed and not entry.inconclusive]

    @property
    def undecided(self) -> List[WordAudit]:
        return [entry for entry in self.entries if entry.inconclusive]

    @property
    def inconclusive(self) -> bool:
        """No word failed, but some fell in the modulus band around 1."""
        return not self.failures and bool(self.undecided)

    @property
    def max_hausdorff_ratio(self) -> float:
        ratios = [e.hausdorff_ratio for e in self.entries if np.isfinite(e.hausdorff_ratio)]
        return max(ratios) if ratios else float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "words_checked": len(self.entries),
            "inconclusive": self.inconclusive,
            "separation_floor": self.separation_floor,
            "max_hausdorff_ratio": self.max_hausdorff_ratio,
            "failures": [entry.to_dict() for entry in self.failures],
            "undecided": [entry.to_dict() for entry in self.undecided],
        }


def _word_actions(group: SchottkyGroup, word: Word):
    matrices = [group.letter_matrix(letter) for letter in word]
    inverses = [group.letter_matrix(letter.inverse()) for letter in word]

    def forward(X):
        for M in reversed(matrices):
            X = M @ X
        return X

    def backward(X):
        for M in inverses:
            X = M @ X
        return X

    return forward, backward


def audit_products(group: SchottkyGroup, max_len: int, band: float = MODULUS_BAND) -> ProductAudit:
    """
    Every nonempty cyclically reduced word up to max_len must be
    pseudohyperbolic, eps(W)/3-separated, 1-contracting and far from the identity.
    """
    if not group.certified:
        logger.warning("Auditing products of a group that is not certified")
    ctx = group.ctx
    N0 = ctx.form_N0()
    floor = group.frameset.separation / 3.0 - 1e-6
    s_G = group.strength
    entries = []
    for word in enumerate_words(group.n, max_len, WordMode.CYCLICALLY_REDUCED):
        if len(word) == 0:
            continue
        forward, backward = _word_actions(group, word)
        det_value = float(np.prod([group.letter_determinant(letter) for letter in word]))
        identity_distance = float(np.linalg.norm(group.word_matrix(word) - np.eye(ctx.dim)))
        try:
            g = extract_pseudohyperbolic(ctx, forward, backward, det_value, band=band)
        except NotPseudohyperbolicError as e:
            entries.append(WordAudit(str(word), False, str(e), float("nan"), float("nan"),
                                     float("nan"), identity_distance, False))
            logger.info(f"[FAILED] word {word}: {e}")
            continue
        except InconclusiveSpectrumError as e:
            entries.append(WordAudit(str(word), False, str(e), float("nan"), float("nan"),
                                     float("nan"), identity_distance, False, inconclusive=True))
            logger.info(f"[INCONCLUSIVE] word {word}: {e}")
            continue

        first = word.letters[0]
        first_frame = group.generators[first.index].frame
        first_more = first_frame.V_more if first.sign == 1 else first_frame.V_less
        hausdorff = subspace_hausdorff_angle(N0, g.frame.V_more.subspace, first_more.subspace)
        separation = g.frame.separation
        strength = g.strength
        ok = separation >= floor and strength < 1.0 and identity_distance > 0.1
        entries.append(WordAudit(
            str(word), True, "ok", float(separation), float(strength),
            float(hausdorff / s_G), identity_distance, bool(ok),
        ))
        if not ok:
            logger.info(f"[FAILED] word {word}: separation {separation:.6f}, s {strength:.3e}")

    audit = ProductAudit(entries, floor)
    marker = "[OK]" if audit.passed else "[INCONCLUSIVE]" if audit.inconclusive else "[FAILED]"
    logger.info(f"{marker} product audit: {len(entries)} words up to length {max_len}")
    return audit
