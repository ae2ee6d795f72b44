"""Shared fixtures: demo contexts, frames and groups."""

import json

import numpy as np
import pytest

from affine_schottky.affine import build_deformation, canonical_translations, in_T
from affine_schottky.core_geometry import SpaceContext
from affine_schottky.mtis import build_frame, generate_transversal_family
from affine_schottky.pseudohyperbolic import build_pseudohyperbolic
from affine_schottky.schottky import build_group, certify

DEMO_THETAS = [0.0, np.pi / 2, np.pi, 3 * np.pi / 2]
DEMO_PAIRING = [[0, 2], [1, 3]]
DEMO_EPSILON = 0.75


def demo_spec(d: int = 1, strength: float = 1e-3) -> dict:
    return {
        "d": d,
        "n": 2,
        "thetas": DEMO_THETAS,
        "pairing": DEMO_PAIRING,
        "g_less": [(strength * np.eye(d)).tolist()] * 2,
        "epsilon": DEMO_EPSILON,
    }


@pytest.fixture(scope="session")
def ctx1():
    return SpaceContext.standard(1)


@pytest.fixture(scope="session")
def ctx3():
    return SpaceContext.standard(3)


@pytest.fixture(scope="session")
def symmetric_frame1(ctx1):
    """Frame (V_0, V_pi) in R^{2,1}."""
    family = generate_transversal_family(ctx1, 1, [0.0, np.pi])
    return build_frame(family[0], family[1])


@pytest.fixture(scope="session")
def symmetric_frame3(ctx3):
    family = generate_transversal_family(ctx3, 1, [0.0, np.pi])
    return build_frame(family[0], family[1])


@pytest.fixture(scope="session")
def demo_map1(symmetric_frame1):
    return build_pseudohyperbolic(symmetric_frame1, np.array([[1e-3]]))


@pytest.fixture(scope="session")
def demo_map3(symmetric_frame3):
    return build_pseudohyperbolic(symmetric_frame3, 1e-4 * np.eye(3))


@pytest.fixture(scope="session")
def group_d1(ctx1):
    return build_group(ctx1, 2, DEMO_THETAS, DEMO_PAIRING, [np.array([[1e-3]])] * 2, DEMO_EPSILON)


@pytest.fixture(scope="session")
def group_d3(ctx3):
    return build_group(ctx3, 2, DEMO_THETAS, DEMO_PAIRING, [1e-4 * np.eye(3)] * 2, DEMO_EPSILON)


@pytest.fixture(scope="session")
def certified_d1(group_d1):
    return certify(group_d1, samples=1000, seed=0)


@pytest.fixture(scope="session")
def deformation_d1(certified_d1):
    deformation = build_deformation(certified_d1, canonical_translations(certified_d1))
    return deformation.with_admissibility(in_T(deformation, samples=300, seed=0))


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "group_spec.json"
    path.write_text(json.dumps(demo_spec()), encoding="utf-8")
    return path
