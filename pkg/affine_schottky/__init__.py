"""
Affine Schottky Domains
Numerical toolkit for Schottky subgroups of SO(d+1, d), their tennis-ball
ping-pong domains and the fundamental domains of their affine deformations.
"""

from .affine import AffineDeformation, build_deformation, classify_point, in_T, trace_point
from .core_geometry import SpaceContext
from .errors import AffineSchottkyError
from .mtis import build_frame, generate_transversal_family, mtis_from_map
from .pseudohyperbolic import PseudoHyperbolicMap, build_pseudohyperbolic, is_pseudohyperbolic
from .schottky import SchottkyGroup, audit_products, build_group, certify

__version__ = "0.1.0"

__all__ = [
    "AffineDeformation",
    "AffineSchottkyError",
    "PseudoHyperbolicMap",
    "SchottkyGroup",
    "SpaceContext",
    "audit_products",
    "build_deformation",
    "build_frame",
    "build_group",
    "build_pseudohyperbolic",
    "certify",
    "classify_point",
    "generate_transversal_family",
    "in_T",
    "is_pseudohyperbolic",
    "mtis_from_map",
    "trace_point",
]
