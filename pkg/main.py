#!/usr/bin/env python3
"""
Affine Schottky Domains
=======================
Schottky subgroups of SO(d+1, d), tennis-ball ping-pong certification and
fundamental domains of their affine deformations.

License: MIT
"""

import sys


def main():
    """Main entry point for the application."""
    print("=" * 60)
    print("Affine Schottky Domains")
    print("=" * 60)
    print()
    print("Available commands:")
    print()
    print("  python main.py gen --d 1 --n 2 --out spec.json   - Write a demo group spec")
    print("  python main.py certify --spec spec.json          - Run the certification suite")
    print("  python main.py trace --spec spec.json            - Trace points to their tiles")
    print("  python main.py export --spec spec.json --what wings")
    print("  python run_pipeline.py                           - Run every demo step")
    print()
    print("=" * 60)

    if len(sys.argv) > 1:
        from affine_schottky.cli import main as cli_main
        sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
