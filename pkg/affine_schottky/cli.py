"""
Command-Line Driver
Builds demo group specs, runs the certification suite, traces points through
the tiling and exports point clouds for external plotting.

Exit codes: 0 pass, 1 fail, 2 inconclusive (or even d), 3 bad input,
4 unmet precondition.
"""

import argparse
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .affine import (
    AffineDeformation,
    TraceStatus,
    build_deformation,
    canonical_translations,
    in_T,
    quotient_report,
    trace_point,
    verify_affine_ping_pong,
    verify_angle_control,
)
from .config_manager import ConfigurationManager
from .core_geometry import TOLERANCE, SpaceContext
from .errors import (
    AffineSchottkyError,
    ContractionError,
    EvenDimensionError,
    InconclusiveSpectrumError,
    SpecValidationError,
    UncertifiedError,
)
from .exports import (
    EXPORT_KINDS,
    domains_cloud,
    load_points,
    tiles_cloud,
    traces_table,
    wings_cloud,
    write_csv,
    write_json_report,
)
from .exterior import (
    LipschitzRegion,
    analyze_proximal,
    check_correspondence,
    ext_form,
    ext_operator,
    lipschitz_on_set,
)
from .mtis import generate_transversal_family
from .pseudohyperbolic import MIN_RHO_GAP, PseudoHyperbolicMap
from .schemas import GroupSpecModel, load_group_spec
from .schottky import (
    SchottkyGroup,
    audit_products,
    build_frameset,
    build_schottky_group,
    certify,
    choose_radii,
    heuristic_strength,
)

logger = logging.getLogger("AffineSchottkyCLI")

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_BAD_INPUT = 3
EXIT_PRECONDITION = 4

COMMANDS = ("gen", "certify", "trace", "export")

# Contraction of the generated demo groups; other d use heuristic_strength.
DEMO_STRENGTH = {1: 1e-3, 3: 1e-4}
DEFAULT_EPSILON = 0.75

CORRESPONDENCE_TOL = 1e-8


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one CLI run: flags over environment over config file."""

    command: str
    seed: int
    sphere_samples: int
    domain_samples: int
    lipschitz_pairs: int
    gap_rays: int
    max_word_length: int
    max_steps: int
    random_points: int
    radius_factor: float
    band: float
    boundary_tol: float
    min_rho_gap: float
    rank_tol: float
    report_path: str
    traces_path: str
    export_dir: str
    spec_path: Optional[str] = None
    points_path: Optional[str] = None
    out: Optional[str] = None
    force: bool = False
    what: Optional[str] = None
    resolution: int = 200

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise SpecValidationError(f"unknown command {self.command!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise SpecValidationError(f"seed must be a non-negative integer, got {self.seed!r}")
        for name in ("sphere_samples", "domain_samples", "lipschitz_pairs"):
            if getattr(self, name) < 100:
                raise SpecValidationError(f"{name} must be at least 100, got {getattr(self, name)}")
        if self.max_steps < 0:
            raise SpecValidationError(f"max_steps must be >= 0, got {self.max_steps}")
        if self.random_points < 1:
            raise SpecValidationError(f"random point count must be positive, got {self.random_points}")
        if self.resolution < 1:
            raise SpecValidationError(f"resolution must be positive, got {self.resolution}")
        if self.command in ("certify", "trace", "export") and not self.spec_path:
            raise SpecValidationError(f"{self.command} needs --spec")

    @classmethod
    def resolve(cls, args: argparse.Namespace, config: Dict[str, Any]) -> "RunConfig":
        def pick(flag: str, value: Any) -> Any:
            given = getattr(args, flag, None)
            return value if given is None else given

        sampling = config["sampling"]
        tolerances = config["tolerances"]
        tracing = config["tracing"]
        output = config["output"]
        return cls(
            command=args.command,
            seed=pick("seed", sampling["seed"]),
            sphere_samples=pick("samples", sampling["sphere_samples"]),
            domain_samples=sampling["domain_samples"],
            lipschitz_pairs=sampling["lipschitz_pairs"],
            gap_rays=pick("gap_rays", sampling["gap_rays"]),
            max_word_length=pick("max_word_length", config["audit"]["max_word_length"]),
            max_steps=pick("max_steps", tracing["max_steps"]),
            random_points=pick("random", tracing["random_points"]),
            radius_factor=float(tracing["radius_factor"]),
            band=float(tolerances["band"]),
            boundary_tol=float(tolerances["boundary"]),
            min_rho_gap=float(tolerances["min_rho_gap"]),
            rank_tol=float(tolerances["rank"]),
            report_path=output["report"],
            traces_path=output["traces"],
            export_dir=output["export_dir"],
            spec_path=getattr(args, "spec", None),
            points_path=getattr(args, "points", None),
            out=getattr(args, "out", None),
            force=bool(getattr(args, "force", False)),
            what=getattr(args, "what", None),
            resolution=pick("resolution", 200),
        )


def cmd_gen(
    d: int,
    n: int,
    thetas: Optional[Sequence[float]],
    strength: Optional[float],
    out: str,
    epsilon: float = DEFAULT_EPSILON,
    min_rho_gap: float = MIN_RHO_GAP,
    tol: float = TOLERANCE,
) -> int:
    """
    Write a group spec on the rotation family with g_< = strength * Id.

    Raises:
        EvenDimensionError: For even d
        ContractionError: If strength is not in (0, 1 - min_rho_gap]
    """
    ctx = SpaceContext.standard(d)
    if thetas is None:
        thetas = [float(np.pi * k / n) for k in range(2 * n)]
    pairing = [[k, k + n] for k in range(n)]
    frameset = build_frameset(generate_transversal_family(ctx, n, thetas), pairing)
    radii = choose_radii(frameset, epsilon)
    if strength is None:
        strength = DEMO_STRENGTH.get(d, heuristic_strength(radii))
    if not 0.0 < strength <= 1.0 - min_rho_gap:
        raise ContractionError(f"strength must lie in (0, {1.0 - min_rho_gap}], got {strength}")

    g_less = [(strength * np.eye(d)).tolist() for _ in range(n)]
    group = build_schottky_group(
        frameset, [np.array(A) for A in g_less], epsilon, radii, min_rho_gap, tol
    )
    spec = GroupSpecModel(
        d=d,
        n=n,
        thetas=[float(t) for t in thetas],
        pairing=pairing,
        g_less=g_less,
        epsilon=float(epsilon),
        translations=canonical_translations(group).tolist(),
    )
    write_json_report(spec.model_dump(exclude_none=True), out)
    logger.info(
        f"[OK] Generated group spec: d={d}, n={n}, s(G)={group.strength:.3e}, "
        f"radii={[round(r, 6) for r in radii]}"
    )
    return EXIT_PASS


def _translations(spec: GroupSpecModel, group: SchottkyGroup) -> np.ndarray:
    translations = spec.translation_array()
    return canonical_translations(group) if translations is None else translations


def _correspondence_entry(i: int, g: PseudoHyperbolicMap, radius: float, config: RunConfig) -> Dict[str, Any]:
    report = check_correspondence(g, seed=config.seed)
    entry = {"generator": i, **report.to_dict()}
    passed = (
        report.proximal
        and report.attracting_angle <= CORRESPONDENCE_TOL
        and report.strength_gap <= CORRESPONDENCE_TOL * max(1.0, report.inverse_expanding_norm)
        and report.sandwich_holds
    )
    ctx = g.ctx
    ext = ext_operator(ctx, g.matrix)
    data = analyze_proximal(ext, ext_form(ctx, g.frame.local_form), frame=g.frame)
    if data:
        entry["lipschitz_outside_repelling"] = lipschitz_on_set(
            ext, data, LipschitzRegion.OUTSIDE_REPELLING, radius, config.lipschitz_pairs, config.seed
        )
    entry["passed"] = bool(passed)
    return entry


def _certification_suite(spec: GroupSpecModel, config: RunConfig, result: Dict[str, Any]) -> Dict[str, Any]:
    """Run every check, filling `result` as each one finishes; returns the checks and the undecided ones."""
    group = certify(spec.build(config.min_rho_gap, config.rank_tol), config.sphere_samples, config.seed)
    report = group.certification
    result.update({
        "strength": group.strength,
        "separation": group.frameset.separation,
        "radii": group.radii,
        "ping_pong": report.ping_pong,
        "disjointness": report.disjointness,
        "tan4": report.tan4,
        "radii_inclusion": report.radii_inclusion,
    })
    products = audit_products(group, config.max_word_length, config.band)
    result["products"] = products.to_dict()

    deformation = build_deformation(group, _translations(spec, group))
    admissible = in_T(deformation, config.domain_samples, config.seed, config.radius_factor)
    result["admissibility"] = admissible.to_dict()
    deformation = deformation.with_admissibility(admissible)
    affine_ping_pong = verify_affine_ping_pong(deformation, config.sphere_samples, config.seed, config.radius_factor)
    result["affine_ping_pong"] = affine_ping_pong
    angle_control = verify_angle_control(group.ctx, samples=100, seed=config.seed)
    result["angle_control"] = angle_control
    correspondence = [
        _correspondence_entry(i, g, group.radii[i], config) for i, g in enumerate(group.generators)
    ]
    result["correspondence"] = correspondence
    result["quotient"] = quotient_report(deformation) if group.certified and admissible.inside else None

    return {
        "checks": {
            "ping_pong": bool(report.ping_pong["passed"]),
            "disjointness": bool(report.disjointness["passed"]),
            "products": products.passed,
            "admissibility": admissible.inside,
            "affine_ping_pong": bool(affine_ping_pong["passed"]),
            "angle_control": bool(angle_control["passed"]),
            "correspondence": all(entry["passed"] for entry in correspondence),
        },
        "inconclusive": ["products"] if products.inconclusive else [],
    }


def cmd_certify(config: RunConfig) -> int:
    """
    Sphere ping-pong, product audit, admissibility of t, affine ping-pong,
    angle control and the proximal correspondence.

    Modulus-band cases give exit 2; the report is written on every verdict.
    """
    spec = load_group_spec(config.spec_path)
    result: Dict[str, Any] = {
        "command": "certify",
        "seed": config.seed,
        "samples": config.sphere_samples,
        "spec": spec.model_dump(exclude_none=True),
    }
    out = config.out or config.report_path
    try:
        outcome = _certification_suite(spec, config, result)
    except InconclusiveSpectrumError as e:
        logger.error(f"[INCONCLUSIVE] certification stopped: {e}")
        result.update({"passed": False, "verdict": "inconclusive", "reason": str(e)})
        write_json_report(result, out)
        return EXIT_INCONCLUSIVE

    checks = outcome["checks"]
    undecided = outcome["inconclusive"]
    failed = [name for name, ok in checks.items() if not ok and name not in undecided]
    passed = not failed and not undecided
    verdict = "passed" if passed else "failed" if failed else "inconclusive"
    result.update({"checks": checks, "inconclusive": undecided, "passed": passed, "verdict": verdict})
    write_json_report(result, out)

    logger.info("=" * 70)
    logger.info("CERTIFICATION SUMMARY")
    logger.info("=" * 70)
    for name, ok in checks.items():
        marker = "[OK]" if ok else "[INCONCLUSIVE]" if name in undecided else "[FAILED]"
        logger.info(f"  {marker} {name}")
    logger.info("=" * 70)
    if failed:
        return EXIT_FAIL
    return EXIT_INCONCLUSIVE if undecided else EXIT_PASS


def _random_points(deformation: AffineDeformation, count: int, seed: int, radius_factor: float) -> np.ndarray:
    """Uniform points in the ball of radius radius_factor * max |t_i|."""
    dim = deformation.ctx.dim
    radius = radius_factor * float(np.max(np.linalg.norm(deformation.translations, axis=1)))
    rng = np.random.default_rng([seed, 53])
    X = rng.standard_normal((count, dim))
    X *= (radius * rng.random(count) ** (1.0 / dim) / np.linalg.norm(X, axis=1))[:, None]
    return X


def cmd_trace(config: RunConfig) -> int:
    """
    Trace points to their tiles and write one CSV row per step. An unforced
    run exits 1 when some point does not land.

    Raises:
        UncertifiedError: If the group or its translations fail certification and --force is absent
    """
    spec = load_group_spec(config.spec_path)
    group = spec.build(config.min_rho_gap, config.rank_tol)
    deformation = build_deformation(group, _translations(spec, group))
    if not config.force:
        group = certify(group, config.sphere_samples, config.seed)
        deformation = build_deformation(group, deformation.translations)
        admissible = in_T(deformation, config.domain_samples, config.seed, config.radius_factor)
        if not group.certified or not admissible.inside:
            raise UncertifiedError(
                "group or translations are not certified; rerun with --force to trace anyway"
            )
        deformation = deformation.with_admissibility(admissible)
    else:
        logger.warning("Tracing without certification (--force)")

    if config.points_path:
        points = load_points(config.points_path, deformation.ctx.dim)
    else:
        points = _random_points(deformation, config.random_points, config.seed, config.radius_factor)

    traces = [
        trace_point(deformation, x, config.max_steps, config.boundary_tol, config.gap_rays, config.seed)
        for x in points
    ]
    write_csv(traces_table(traces, deformation.ctx.dim), config.out or config.traces_path, "traces")

    landed = sum(trace.status is TraceStatus.LANDED for trace in traces)
    floors = [t.gaps.delta_floor for t in traces if t.gaps is not None and np.isfinite(t.gaps.delta_floor)]
    monotone = sum(t.gaps.monotone for t in traces if t.gaps is not None)
    with_gaps = sum(t.gaps is not None for t in traces)
    rate = landed / len(traces) if traces else 0.0
    floor = min(floors) if floors else float("nan")
    logger.info(
        f"Landing rate: {rate:.1%} ({landed}/{len(traces)}), "
        f"empirical delta floor: {floor:.6g}, monotone gap sequences: {monotone}/{with_gaps}"
    )
    if landed < len(traces) and not config.force:
        logger.error(f"[FAILED] {len(traces) - landed} point(s) of a certified group did not land")
        return EXIT_FAIL
    return EXIT_PASS


def cmd_export(config: RunConfig) -> int:
    """Deterministic point clouds of wings, cone domains or first-generation tiles."""
    if config.what not in EXPORT_KINDS:
        raise SpecValidationError(f"--what must be one of {EXPORT_KINDS}, got {config.what!r}")
    spec = load_group_spec(config.spec_path)
    group = spec.build(config.min_rho_gap, config.rank_tol)
    if config.what == "wings":
        frame = wings_cloud(group, config.resolution, config.seed)
    else:
        deformation = build_deformation(group, _translations(spec, group))
        sampler = domains_cloud if config.what == "domains" else tiles_cloud
        frame = sampler(deformation, config.resolution, config.seed, config.radius_factor)
    out = config.out or str(Path(config.export_dir) / f"{config.what}.csv")
    write_csv(frame, out, config.what)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Configuration JSON (default: $AFFINE_SCHOTTKY_CONFIG or config.json)")
    common.add_argument("--seed", type=int, default=None, help="Seed of every sampled verdict")
    common.add_argument("--out", default=None, help="Output file")

    parser = argparse.ArgumentParser(
        prog="affine-schottky",
        description="Schottky groups in SO(d+1, d) and their affine deformations"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="Write a demo group spec")
    gen.add_argument("--d", type=int, required=True, help="Half dimension (odd)")
    gen.add_argument("--n", type=int, default=2, help="Number of generators")
    gen.add_argument("--thetas", type=float, nargs="+", default=None, help="2n rotation angles")
    gen.add_argument("--strength", type=float, default=None, help="Contraction s(g_i) of every generator")
    gen.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="Target angle epsilon")

    cert = sub.add_parser("certify", parents=[common], help="Run the certification suite")
    cert.add_argument("--spec", required=True, help="Group spec JSON")
    cert.add_argument("--samples", type=int, default=None, help="Sphere samples per generator")
    cert.add_argument("--max-word-length", type=int, default=None, help="Product audit word length")

    trace = sub.add_parser("trace", parents=[common], help="Trace points to their tiles")
    trace.add_argument("--spec", required=True, help="Group spec JSON")
    source = trace.add_mutually_exclusive_group()
    source.add_argument("--points", default=None, help="CSV of points (columns x0..x{2d})")
    source.add_argument("--random", type=int, default=None, help="Number of random points")
    trace.add_argument("--max-steps", type=int, default=None, help="Step budget per point")
    trace.add_argument("--samples", type=int, default=None, help="Sphere samples of the certification")
    trace.add_argument("--gap-rays", type=int, default=None, help="Rays of the gap sequence (0 disables it)")
    trace.add_argument("--force", action="store_true", help="Trace without certification")

    export = sub.add_parser("export", parents=[common], help="Export point clouds")
    export.add_argument("--spec", required=True, help="Group spec JSON")
    export.add_argument("--what", choices=EXPORT_KINDS, required=True, help="Cloud to export")
    export.add_argument("--resolution", type=int, default=None, help="Points per piece")
    return parser


def configure_logging(level: str, directory: str, command: str) -> Path:
    log_dir = Path(directory)
    log_dir.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_file = log_dir / f"{command}_{timestamp}.log"
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(message)s",
        handlers=[
            logging.FileHandler(log_file, encoding="utf-8"),
            logging.StreamHandler()
        ]
    )
    return log_file


def _dispatch(args: argparse.Namespace, config: RunConfig) -> int:
    if config.command == "gen":
        return cmd_gen(
            args.d, args.n, args.thetas, args.strength,
            config.out or "group_spec.json", args.epsilon, config.min_rho_gap, config.rank_tol,
        )
    if config.command == "certify":
        return cmd_certify(config)
    if config.command == "trace":
        return cmd_trace(config)
    return cmd_export(config)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the exit code."""
    args = build_parser().parse_args(argv)

    settings = ConfigurationManager(args.config)
    try:
        settings.load_config(log_settings=False)
    except SpecValidationError as e:
        logger.error(f"[FAILED] configuration: {e}")
        return EXIT_BAD_INPUT

    log_file = configure_logging(
        settings.get_setting("logging.level", "INFO"),
        settings.get_setting("logging.directory", "logs"),
        args.command,
    )
    settings.log_configuration()
    logger.info(f"Command: {args.command}, log file: {log_file}")

    try:
        config = RunConfig.resolve(args, settings.config)
        return _dispatch(args, config)
    except EvenDimensionError as e:
        logger.error(f"[FAILED] {e}")
        logger.error("Positive wings of transversal subspaces meet for even d; no Schottky frameset exists")
        return EXIT_INCONCLUSIVE
    except InconclusiveSpectrumError as e:
        logger.error(f"[INCONCLUSIVE] {e}")
        return EXIT_INCONCLUSIVE
    except UncertifiedError as e:
        logger.error(f"[FAILED] {e}")
        return EXIT_PRECONDITION
    except AffineSchottkyError as e:
        logger.error(f"[FAILED] bad input: {e}")
        return EXIT_BAD_INPUT
