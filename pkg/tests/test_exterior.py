"""Tests for exterior powers and the proximal correspondence."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affine_schottky.core_geometry import custom_form, principal_angles
from affine_schottky.errors import DimensionMismatchError, EmptyRegionError, NotProximalError
from affine_schottky.exterior import (
    LipschitzRegion,
    analyze_proximal,
    audit_proximal_system,
    check_correspondence,
    compound_matrix,
    ext_basis,
    ext_form,
    ext_operator,
    lipschitz_on_set,
    repulsing_hyperplane_from_frame,
    wedge,
)


class TestCompound:
    def test_identity(self):
        assert np.allclose(compound_matrix(np.eye(5), 2), np.eye(10))

    def test_extreme_degrees(self):
        M = np.random.default_rng(0).standard_normal((4, 4))
        assert np.allclose(compound_matrix(M, 1), M)
        assert compound_matrix(M, 4)[0, 0] == pytest.approx(np.linalg.det(M))

    @given(st.integers(min_value=0, max_value=2**31 - 1), st.integers(min_value=1, max_value=4))
    @settings(max_examples=30, deadline=None)
    def test_cauchy_binet(self, seed, k):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((5, 5))
        B = rng.standard_normal((5, 5))
        assert np.allclose(compound_matrix(A @ B, k), compound_matrix(A, k) @ compound_matrix(B, k))

    def test_basis_labels(self):
        labels = [index.label for index in ext_basis(3, 2)]
        assert labels == ["e1^e2", "e1^e3", "e2^e3"]


class TestWedge:
    def test_coordinate_plane(self):
        eye = np.eye(3)
        assert np.allclose(wedge(eye[:, [0, 1]]), [1.0, 0.0, 0.0])
        assert np.allclose(wedge(eye[:, [1, 0]]), [-1.0, 0.0, 0.0])

    def test_compound_acts_on_wedges(self):
        rng = np.random.default_rng(2)
        g = rng.standard_normal((5, 5))
        X = rng.standard_normal((5, 2))
        assert np.allclose(compound_matrix(g, 2) @ wedge(X), wedge(g @ X))

    def test_dependent_vectors(self):
        x = np.array([1.0, 2.0, 3.0])
        assert np.allclose(wedge(np.column_stack([x, 2 * x])), 0.0)


class TestExtForms:
    def test_standard_n0_stays_identity(self, ctx3):
        assert np.allclose(ext_form(ctx3, ctx3.form_N0()).gram, np.eye(35))

    def test_wrong_operator_shape(self, ctx1):
        with pytest.raises(DimensionMismatchError):
            ext_operator(ctx1, np.eye(4))

    def test_operator_size(self, ctx3, demo_map3):
        assert ext_operator(ctx3, demo_map3.matrix).size == 35


class TestAnalyzeProximal:
    def test_diagonal_map(self):
        data = analyze_proximal(np.diag([3.0, 1.0, 0.5]))
        assert data
        assert data.top_eigenvalue == pytest.approx(3.0)
        assert np.allclose(np.abs(data.V_s.basis[:, 0]), [1.0, 0.0, 0.0], atol=1e-9)
        assert data.separation == pytest.approx(np.pi / 2)
        assert data.strength == pytest.approx(1.0 / 3.0)

    def test_tied_moduli(self):
        result = analyze_proximal(np.diag([2.0, -2.0, 1.0]))
        assert not result
        assert result.leading_moduli == pytest.approx((2.0, 2.0))

    def test_nilpotent(self):
        result = analyze_proximal(np.array([[0.0, 1.0], [0.0, 0.0]]))
        assert not result
        assert "nilpotent" in result.reason

    def test_frame_gives_repelling_hyperplane(self, symmetric_frame1):
        V_u = repulsing_hyperplane_from_frame(symmetric_frame1)
        N0 = symmetric_frame1.ctx.form_N0()
        assert V_u.dim == 2
        assert principal_angles(N0, V_u, symmetric_frame1.V_leq).max() < 1e-10


class TestCorrespondence:
    @pytest.mark.parametrize("fixture, strength", [("demo_map1", 1e-3), ("demo_map3", 1e-4)])
    def test_strength_matches(self, request, fixture, strength):
        g = request.getfixturevalue(fixture)
        report = check_correspondence(g, draws=20)
        assert report.proximal
        assert report.strength_local == pytest.approx(strength, rel=1e-6)
        assert report.strength_gap <= 1e-6 * strength
        assert report.attracting_angle < 1e-8
        assert report.repelling_angle < 1e-6

    def test_top_modulus_is_determinant_of_expanding_part(self, demo_map3):
        report = check_correspondence(demo_map3, draws=5)
        assert report.top_modulus == pytest.approx(report.det_more, rel=1e-8)
        assert report.det_more == pytest.approx(1e12, rel=1e-8)

    def test_sandwich_d1_is_equality(self, demo_map1):
        report = check_correspondence(demo_map1, draws=50, seed=4)
        assert report.sandwich_holds
        for sample in report.sandwich:
            assert sample.wedge_angle == pytest.approx(sample.hausdorff, abs=1e-12)

    def test_sandwich_d3(self, demo_map3):
        report = check_correspondence(demo_map3, draws=50, seed=5)
        assert report.sandwich_holds
        assert len(report.sandwich) == 50

    def test_report_dict(self, demo_map1):
        data = check_correspondence(demo_map1, draws=3).to_dict()
        assert data["proximal"] is True
        assert data["sandwich_samples"] == 3


class TestProximalSystem:
    def test_group_generators(self, group_d1):
        audit = audit_proximal_system([g.matrix for g in group_d1.generators])
        assert audit.separation > 0
        assert audit.strength < 0.1
        assert len(audit.maps) == 2
        # each of 4 members against 3 others
        assert len(audit.pairwise_angles) == 12

    def test_identity_member(self, demo_map1):
        with pytest.raises(NotProximalError):
            audit_proximal_system([demo_map1.matrix, np.eye(3)])


class TestLipschitz:
    @pytest.fixture(scope="class")
    def local_data(self, ctx1, demo_map1):
        ext = ext_operator(ctx1, demo_map1.matrix)
        data = analyze_proximal(ext, ext_form(ctx1, demo_map1.frame.local_form), frame=demo_map1.frame)
        return ext, data

    def test_contracts_outside_repelling_hyperplane(self, local_data):
        ext, data = local_data
        value = lipschitz_on_set(ext, data, LipschitzRegion.OUTSIDE_REPELLING, 0.5, samples=2000)
        assert 0 < value < 0.1

    def test_contracts_near_attracting_line(self, local_data):
        ext, data = local_data
        value = lipschitz_on_set(ext, data, LipschitzRegion.NEAR_ATTRACTING, 0.3, samples=2000)
        assert 0 < value < 0.1

    def test_empty_region(self, local_data):
        ext, data = local_data
        with pytest.raises(EmptyRegionError):
            lipschitz_on_set(ext, data, LipschitzRegion.OUTSIDE_REPELLING, np.pi / 2, samples=100)

    def test_plain_matrix_and_form(self):
        F = np.diag([10.0, 1.0, 1.0])
        data = analyze_proximal(F, custom_form(np.eye(3)))
        value = lipschitz_on_set(F, data, LipschitzRegion.NEAR_ATTRACTING, 0.2, samples=1000)
        assert value < 0.2
