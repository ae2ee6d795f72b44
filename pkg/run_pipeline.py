#!/usr/bin/env python3
"""
Affine Schottky Domains - Demo Pipeline
Runs gen -> certify -> trace -> export for the demo groups, one step after
another, with a per-run log file under logs/.
"""

import sys
import logging
from datetime import datetime
from pathlib import Path

from affine_schottky.cli import EXIT_PASS, main as cli_main

# Setup logging
log_dir = Path("logs")
log_dir.mkdir(exist_ok=True)
timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
log_file = log_dir / f"pipeline_{timestamp}.log"

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(message)s",
    handlers=[
        logging.FileHandler(log_file, encoding="utf-8"),
        logging.StreamHandler()
    ]
)
logger = logging.getLogger(__name__)

OUTPUT_DIR = Path("demo_output")

# Demo groups: d=1 and d=3, two generators each
DEMOS = [
    {"name": "d1", "d": 1, "n": 2},
    {"name": "d3", "d": 3, "n": 2},
]


def build_steps(demo: dict) -> list:
    """CLI invocations of one demo, in order."""
    base = OUTPUT_DIR / demo["name"]
    spec = str(base / "group_spec.json")
    steps = [
        {
            "name": f"{demo['name']}: generate",
            "argv": ["gen", "--d", str(demo["d"]), "--n", str(demo["n"]), "--out", spec],
            "output": spec,
            "description": "Write the group spec with canonical translations"
        },
        {
            "name": f"{demo['name']}: certify",
            "argv": ["certify", "--spec", spec, "--out", str(base / "report.json")],
            "output": str(base / "report.json"),
            "description": "Sphere ping-pong, product audit, admissibility, angle control"
        },
        {
            "name": f"{demo['name']}: trace",
            "argv": ["trace", "--spec", spec, "--out", str(base / "traces.csv")],
            "output": str(base / "traces.csv"),
            "description": "Trace random points to their tiles"
        },
    ]
    for what in ("wings", "domains", "tiles"):
        out = str(base / f"{what}.csv")
        steps.append({
            "name": f"{demo['name']}: export {what}",
            "argv": ["export", "--spec", spec, "--what", what, "--out", out],
            "output": out,
            "description": f"Point cloud of the {what}"
        })
    return steps


def verify_output(output_path: str) -> bool:
    """Check if expected output file exists."""
    path = Path(output_path)
    exists = path.exists()

    if exists:
        logger.info(f"  Output verified: {output_path} ({path.stat().st_size:,} bytes)")
    else:
        logger.warning(f"  Output not found: {output_path}")

    return exists


def run_pipeline(demos: list, stop_on_failure: bool = False) -> bool:
    """Run every step of the selected demos."""
    steps = [step for demo in demos for step in build_steps(demo)]

    logger.info("=" * 70)
    logger.info("AFFINE SCHOTTKY DOMAINS - DEMO PIPELINE")
    logger.info("=" * 70)
    logger.info(f"Running {len(steps)} steps for demos: {', '.join(d['name'] for d in demos)}")
    logger.info(f"Log file: {log_file}")

    completed = 0
    failed = 0

    for i, step in enumerate(steps, start=1):
        logger.info(f"{'='*70}")
        logger.info(f"STEP {i}/{len(steps)}: {step['name']}")
        logger.info(f"{'='*70}")
        logger.info(f"Description: {step['description']}")

        code = cli_main(step["argv"])
        if code == EXIT_PASS and verify_output(step["output"]):
            logger.info(f"[OK] Completed: {step['name']}")
            completed += 1
        else:
            logger.error(f"[FAILED] {step['name']} (exit code {code})")
            failed += 1
            if stop_on_failure:
                logger.info("Pipeline execution stopped after a failure.")
                break

    logger.info(f"{'='*70}")
    logger.info("PIPELINE EXECUTION SUMMARY")
    logger.info(f"{'='*70}")
    logger.info(f"Completed: {completed}/{len(steps)}")
    logger.info(f"Failed: {failed}/{len(steps)}")
    logger.info(f"Log file: {log_file}")
    logger.info(f"{'='*70}")

    return failed == 0


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(
        description="Run the affine Schottky demo pipeline"
    )
    parser.add_argument(
        "--demo",
        choices=[d["name"] for d in DEMOS],
        action="append",
        default=None,
        help="Demo group to run (repeatable, default: all)"
    )
    parser.add_argument(
        "--stop-on-failure",
        action="store_true",
        help="Stop at the first failing step"
    )
    parser.add_argument(
        "--list",
        action="store_true",
        help="List all steps and exit"
    )

    args = parser.parse_args()
    selected = [d for d in DEMOS if args.demo is None or d["name"] in args.demo]

    if args.list:
        print("\nPipeline Steps:")
        print("=" * 70)
        for demo in selected:
            for step in build_steps(demo):
                print(f"- {step['name']}")
                print(f"   {step['description']}")
                print(f"   Command: affine-schottky {' '.join(step['argv'])}")
                print()
        sys.exit(0)

    success = run_pipeline(selected, args.stop_on_failure)
    sys.exit(0 if success else 1)
