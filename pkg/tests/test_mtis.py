"""Tests for maximal isotropic subspaces, wings and frames."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affine_schottky.core_geometry import SpaceContext, principal_angles
from affine_schottky.errors import (
    DimensionMismatchError,
    EvenDimensionError,
    NotIsotropicError,
    NotOrthogonalError,
    NotTransversalError,
    SpecValidationError,
)
from affine_schottky.mtis import (
    build_frame,
    frame_separation,
    generate_transversal_family,
    is_transversal,
    map_from_mtis,
    mtis_from_map,
    positive_wing,
    random_orthogonal_map,
    sample_wing,
    wing_angle,
    wing_contains,
    wing_pair_angle,
    wings_intersection_check,
)


@st.composite
def transversal_pair(draw, d=1):
    """Two random maximal isotropic subspaces that are transversal."""
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    ctx = SpaceContext.standard(d, allow_even=(d % 2 == 0))
    while True:
        V1 = mtis_from_map(ctx, random_orthogonal_map(d, rng))
        V2 = mtis_from_map(ctx, random_orthogonal_map(d, rng))
        if is_transversal(V1, V2).margin > 1e-3:
            return V1, V2


class TestRepresentation:
    @given(st.integers(min_value=0, max_value=2**31 - 1), st.sampled_from([1, 3]))
    @settings(max_examples=30, deadline=None)
    def test_map_round_trip(self, seed, d):
        ctx = SpaceContext.standard(d)
        f = random_orthogonal_map(d, np.random.default_rng(seed))
        V = mtis_from_map(ctx, f)
        assert np.abs(map_from_mtis(ctx, V.subspace).f - f).max() <= 1e-10

    def test_graph_is_isotropic(self, ctx3):
        V = mtis_from_map(ctx3, random_orthogonal_map(3, np.random.default_rng(1)))
        assert np.abs(V.basis.T @ ctx3.gram_Q @ V.basis).max() < 1e-12
        assert np.allclose(V.basis.T @ ctx3.gram_N0 @ V.basis, np.eye(3))

    def test_q_complement_contains_v(self, ctx3):
        V = generate_transversal_family(ctx3, 1)[0]
        assert V.q_complement.shape == (7, 4)
        residual = V.basis - V.q_complement @ np.linalg.lstsq(V.q_complement, V.basis, rcond=None)[0]
        assert np.abs(residual).max() < 1e-10

    def test_non_orthogonal_map(self, ctx1):
        with pytest.raises(NotOrthogonalError):
            mtis_from_map(ctx1, np.array([[2.0], [0.0]]))

    def test_wrong_shape(self, ctx3):
        with pytest.raises(DimensionMismatchError):
            mtis_from_map(ctx3, np.eye(3))

    def test_non_isotropic_subspace(self, ctx1):
        with pytest.raises(NotIsotropicError):
            map_from_mtis(ctx1, np.array([[1.0], [0.0], [0.0]]))

    def test_wrong_dimension_subspace(self, ctx1):
        with pytest.raises(NotIsotropicError):
            map_from_mtis(ctx1, np.eye(3)[:, :2])


class TestTransversalFamily:
    def test_family_pairwise_transversal(self, ctx3):
        family = generate_transversal_family(ctx3, 2)
        assert len(family) == 4
        for a in range(4):
            for b in range(a + 1, 4):
                assert is_transversal(family[a], family[b])

    def test_self_is_not_transversal(self, ctx1):
        V = generate_transversal_family(ctx1, 1)[0]
        assert not is_transversal(V, V)

    def test_even_dimension_refused(self):
        with pytest.raises(EvenDimensionError):
            generate_transversal_family(SpaceContext.standard(2, allow_even=True), 1)

    def test_coinciding_angles(self, ctx1):
        with pytest.raises(SpecValidationError):
            generate_transversal_family(ctx1, 1, [0.0, 2 * np.pi])

    def test_wrong_angle_count(self, ctx1):
        with pytest.raises(SpecValidationError):
            generate_transversal_family(ctx1, 2, [0.0, 1.0])


class TestWings:
    @pytest.mark.parametrize("theta", [0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
    def test_apex_of_rotation_family(self, ctx1, theta):
        V = generate_transversal_family(ctx1, 1, [theta, theta + 1.0])[0]
        wing = positive_wing(ctx1, V)
        assert np.allclose(wing.apex, [-np.sin(theta), np.cos(theta), 0.0], atol=1e-10)

    def test_apex_lies_in_q_complement(self, ctx3):
        V = generate_transversal_family(ctx3, 1)[1]
        wing = positive_wing(ctx3, V)
        assert np.abs(V.basis.T @ ctx3.gram_Q @ wing.apex).max() < 1e-10
        assert not wing_contains(wing, -wing.apex)
        assert wing_contains(wing, wing.apex)

    def test_base_lies_in_wing_both_ways(self, ctx1):
        V = generate_transversal_family(ctx1, 1)[0]
        wing = positive_wing(ctx1, V)
        assert wing_contains(wing, V.basis[:, 0])
        assert wing_contains(wing, -V.basis[:, 0])
        assert wing_contains(wing, np.zeros(3))

    def test_off_plane_vector_is_outside(self, ctx1):
        wing = positive_wing(ctx1, generate_transversal_family(ctx1, 1)[0])
        assert not wing_contains(wing, np.array([1.0, 0.0, 0.0]))

    def test_samples_lie_in_wing(self, ctx3):
        wing = positive_wing(ctx3, generate_transversal_family(ctx3, 1)[0])
        X = sample_wing(wing, np.random.default_rng(0), 50)
        assert all(wing_contains(wing, x) for x in X)
        assert np.allclose(wing_angle(wing, X, ctx3.form_N0()), 0.0, atol=1e-7)

    def test_wing_angle_of_opposite_apex(self, ctx1):
        wing = positive_wing(ctx1, generate_transversal_family(ctx1, 1)[0])
        assert wing_angle(wing, -wing.apex, ctx1.form_N0())[0] == pytest.approx(np.pi / 2)

    @given(transversal_pair(d=1))
    @settings(max_examples=40, deadline=None)
    def test_odd_wings_meet_trivially_d1(self, pair):
        V1, V2 = pair
        assert wings_intersection_check(V1, V2).trivial

    @given(transversal_pair(d=3))
    @settings(max_examples=25, deadline=None)
    def test_odd_wings_meet_trivially_d3(self, pair):
        V1, V2 = pair
        ctx = V1.ctx
        assert wings_intersection_check(V1, V2).trivial
        gap = wing_pair_angle(positive_wing(ctx, V1), positive_wing(ctx, V2), ctx.form_N0())
        assert gap > 0

    @given(transversal_pair(d=2))
    @settings(max_examples=25, deadline=None)
    def test_even_wings_always_meet(self, pair):
        V1, V2 = pair
        ctx = V1.ctx
        result = wings_intersection_check(V1, V2)
        assert not result.trivial
        w = result.witness
        assert np.linalg.norm(w) > 0
        for V in (V1, V2):
            wing = positive_wing(ctx, V)
            coeffs, residual = wing.coefficients(w[None, :])
            assert residual[0] <= 1e-9
            assert coeffs[0, -1] >= -1e-9

    def test_non_transversal_pair(self, ctx1):
        V = generate_transversal_family(ctx1, 1)[0]
        with pytest.raises(NotTransversalError):
            wings_intersection_check(V, V)


class TestFrames:
    def test_symmetric_frame(self, symmetric_frame1):
        frame = symmetric_frame1
        assert np.allclose(np.abs(frame.e_eq), [0.0, 1.0, 0.0], atol=1e-12)
        assert frame.sign_identities_hold
        assert frame.separation == pytest.approx(np.pi / 2, abs=1e-10)

    def test_local_separation_is_right_angle(self, ctx3):
        family = generate_transversal_family(ctx3, 2)
        frame = build_frame(family[0], family[1])
        assert frame_separation(frame, frame.local_form) == pytest.approx(np.pi / 2, abs=1e-8)

    def test_e_eq_is_q_unit_and_orthogonal(self, symmetric_frame3):
        frame = symmetric_frame3
        ctx = frame.ctx
        assert frame.e_eq @ ctx.gram_Q @ frame.e_eq == pytest.approx(1.0)
        for V in (frame.V_less, frame.V_more):
            assert np.abs(V.basis.T @ ctx.gram_Q @ frame.e_eq).max() < 1e-10

    def test_components_reassemble(self, symmetric_frame3):
        frame = symmetric_frame3
        X = np.random.default_rng(3).standard_normal((5, 7))
        less, eq, more = frame.components(X)
        rebuilt = less @ frame.V_less.basis.T + np.outer(eq / frame.eq_norm, frame.e_eq) + more @ frame.V_more.basis.T
        assert np.allclose(rebuilt, X)

    def test_swapped_frame_flips_e_eq(self, symmetric_frame1):
        swapped = symmetric_frame1.swapped()
        assert np.allclose(swapped.e_eq, -symmetric_frame1.e_eq)
        assert swapped.sign_identities_hold

    def test_closed_halves_swap(self, symmetric_frame3):
        frame = symmetric_frame3
        swapped = frame.swapped()
        N0 = frame.ctx.form_N0()
        assert frame.V_leq.dim == frame.V_geq.dim == 4
        assert principal_angles(N0, swapped.V_leq, frame.V_geq).max() < 1e-8

    def test_frame_needs_transversality(self, ctx1):
        V = generate_transversal_family(ctx1, 1)[0]
        with pytest.raises(NotTransversalError):
            build_frame(V, V)
