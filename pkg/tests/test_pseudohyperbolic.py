"""Tests for pseudohyperbolic maps: assembly, classification and extraction."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affine_schottky.core_geometry import principal_angles
from affine_schottky.errors import (
    ContractionError,
    DimensionMismatchError,
    FormPreservationError,
    InconclusiveSpectrumError,
    NotPseudohyperbolicError,
)
from affine_schottky.mtis import build_frame, generate_transversal_family
from affine_schottky.pseudohyperbolic import (
    build_pseudohyperbolic,
    compose,
    extract_dynamical_part,
    extract_pseudohyperbolic,
    invert,
    inverse,
    is_pseudohyperbolic,
    q_defect,
    spectral_split,
    strength_decay,
)


@st.composite
def contracting_part(draw, d=3):
    """A random d x d matrix rescaled to spectral radius in [1e-3, 0.5]."""
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    target = draw(st.floats(min_value=1e-3, max_value=0.5))
    rng = np.random.default_rng(seed)
    while True:
        A = rng.standard_normal((d, d))
        if np.linalg.cond(A) < 1e3:
            return target * A / np.abs(np.linalg.eigvals(A)).max()


def _frame(ctx, a=0, b=1, n=2):
    family = generate_transversal_family(ctx, n)
    return build_frame(family[a], family[b])


class TestAssembly:
    @given(contracting_part())
    @settings(max_examples=30, deadline=None)
    def test_preserves_q_and_fixes_e_eq(self, ctx3, A):
        g = build_pseudohyperbolic(_frame(ctx3), A)
        assert q_defect(ctx3, g.matrix) < 1e-10
        assert g.determinant == pytest.approx(1.0, rel=1e-9)
        assert np.allclose(g.matrix @ g.frame.e_eq, g.frame.e_eq, atol=1e-8 * np.linalg.norm(g.matrix))

    def test_acts_as_dynamical_part_on_v_less(self, demo_map3):
        B = demo_map3.frame.V_less.basis
        assert np.allclose(demo_map3.matrix @ B, B @ demo_map3.g_less, atol=1e-9)

    def test_determinant_of_blocks(self, demo_map1):
        assert demo_map1.determinant == pytest.approx(1.0)

    def test_symmetric_frame_strength(self, demo_map1, demo_map3):
        assert demo_map1.strength == pytest.approx(1e-3)
        assert demo_map3.strength == pytest.approx(1e-4)
        assert np.allclose(demo_map1.g_more, 1e3 * np.eye(1))

    def test_not_contracting(self, symmetric_frame1):
        with pytest.raises(ContractionError):
            build_pseudohyperbolic(symmetric_frame1, [[1.0]])

    def test_singular_dynamical_part(self, symmetric_frame3):
        with pytest.raises(ContractionError):
            build_pseudohyperbolic(symmetric_frame3, np.diag([0.1, 0.1, 0.0]))

    def test_configured_rho_gap(self, symmetric_frame1):
        g = build_pseudohyperbolic(symmetric_frame1, [[0.99999]], min_rho_gap=1e-6)
        assert g.strength == pytest.approx(0.99999)
        with pytest.raises(ContractionError):
            build_pseudohyperbolic(symmetric_frame1, [[0.99999]])

    def test_rank_tolerance_sets_singularity_cutoff(self, symmetric_frame3):
        A = np.diag([0.1, 0.1, 1e-7])
        assert build_pseudohyperbolic(symmetric_frame3, A).strength == pytest.approx(0.1)
        with pytest.raises(ContractionError):
            build_pseudohyperbolic(symmetric_frame3, A, tol=1e-4)

    def test_wrong_shape(self, symmetric_frame3):
        with pytest.raises(DimensionMismatchError):
            build_pseudohyperbolic(symmetric_frame3, np.eye(2) * 0.1)

    def test_scalar_accepted_for_d1(self, symmetric_frame1):
        assert build_pseudohyperbolic(symmetric_frame1, 0.01).g_less.shape == (1, 1)


class TestInverse:
    def test_inverse_matches_matrix_inverse(self, demo_map1):
        g_inv = inverse(demo_map1)
        assert np.allclose(g_inv.matrix @ demo_map1.matrix, np.eye(3), atol=1e-6)
        assert np.allclose(g_inv.frame.e_eq, -demo_map1.frame.e_eq)

    def test_invert_uses_the_form(self, demo_map1):
        assert np.allclose(invert(demo_map1.ctx, demo_map1.matrix) @ demo_map1.matrix, np.eye(3), atol=1e-7)

    def test_compose_stays_on_group(self, ctx1, demo_map1):
        product = compose(ctx1, demo_map1.matrix, demo_map1.inverse_matrix)
        assert np.allclose(product, np.eye(3), atol=1e-6)


class TestClassification:
    def test_built_map_is_pseudohyperbolic(self, ctx3, demo_map3):
        check = is_pseudohyperbolic(ctx3, demo_map3.matrix)
        assert check
        assert check.dims == (3, 1, 3)

    def test_identity_is_not(self, ctx1):
        check = is_pseudohyperbolic(ctx1, np.eye(3))
        assert not check
        assert check.dims == (0, 3, 0)

    def test_minus_one_on_fixed_line(self, ctx1, symmetric_frame1):
        M = symmetric_frame1.component_basis
        flipped = M @ np.diag([0.1, -1.0, 10.0]) @ np.linalg.inv(M)
        check = is_pseudohyperbolic(ctx1, flipped)
        assert not check
        assert "expected +1" in check.reason

    def test_form_not_preserved(self, ctx1):
        with pytest.raises(FormPreservationError):
            is_pseudohyperbolic(ctx1, 2.0 * np.eye(3))

    def test_modulus_inside_band(self, ctx1):
        with pytest.raises(InconclusiveSpectrumError):
            spectral_split(ctx1, np.diag([1.0 + 5e-7, 1.0, 1.0 / (1.0 + 5e-7)]))

    def test_split_matches_frame(self, ctx3, demo_map3):
        split = spectral_split(ctx3, demo_map3.matrix)
        N0 = ctx3.form_N0()
        frame = demo_map3.frame
        assert principal_angles(N0, split.V_less, frame.V_less.subspace).max() < 1e-8
        assert principal_angles(N0, split.V_more, frame.V_more.subspace).max() < 1e-8
        assert split.moduli_eq == pytest.approx([1.0])

    def test_extract_recovers_dynamical_part(self, ctx3):
        A = np.array([[0.2, 0.05, 0.0], [0.0, 0.1, 0.02], [0.01, 0.0, 0.15]])
        g = build_pseudohyperbolic(_frame(ctx3, 0, 2), A)
        recovered = extract_dynamical_part(ctx3, g.matrix)
        assert np.allclose(recovered.g_less, A, atol=1e-8)
        assert np.allclose(recovered.matrix, g.matrix, atol=1e-8)

    def test_extract_refuses_identity(self, ctx1):
        with pytest.raises(NotPseudohyperbolicError):
            extract_dynamical_part(ctx1, np.eye(3))


class TestStrength:
    def test_decay_matches_spectral_radius(self, demo_map1):
        samples = strength_decay(demo_map1, [1, 2, 3])
        assert [s.power for s in samples] == [1, 2, 3]
        for sample in samples:
            assert sample.strength == pytest.approx(1e-3 ** sample.power, rel=1e-6)
            assert sample.ratio == pytest.approx(1.0, rel=1e-6)

    def test_non_normal_part_decays_like_rho(self, symmetric_frame3):
        A = np.array([[0.3, 1.0, 0.0], [0.0, 0.3, 1.0], [0.0, 0.0, 0.3]])
        g = build_pseudohyperbolic(symmetric_frame3, A)
        samples = strength_decay(g, [5, 20, 40])
        ratios = [s.ratio for s in samples]
        assert all(r >= 1.0 for r in ratios)
        # polynomial factor only
        rates = [np.log(s.ratio) / s.power for s in samples]
        assert rates[0] > rates[1] > rates[2]

    def test_power_must_be_positive(self, demo_map1):
        with pytest.raises(ValueError):
            strength_decay(demo_map1, [0])


class TestMatrixFreeExtraction:
    def test_recovers_product_of_itself(self, ctx3, demo_map3):
        g = demo_map3
        square = np.linalg.matrix_power(g.matrix, 2)
        square_inv = np.linalg.matrix_power(g.inverse_matrix, 2)
        result = extract_pseudohyperbolic(ctx3, lambda X: square @ X, lambda X: square_inv @ X, 1.0)
        assert np.allclose(result.g_less, 1e-8 * np.eye(3), atol=1e-12)
        assert np.allclose(result.frame.V_less.f, g.frame.V_less.f, atol=1e-8)

    def test_identity_is_rejected(self, ctx1):
        with pytest.raises(NotPseudohyperbolicError):
            extract_pseudohyperbolic(ctx1, lambda X: X, lambda X: X, 1.0, max_iter=10)

    def test_wrong_determinant_is_rejected(self, ctx1, demo_map1):
        g = demo_map1
        with pytest.raises(NotPseudohyperbolicError):
            extract_pseudohyperbolic(ctx1, lambda X: g.matrix @ X, lambda X: g.inverse_matrix @ X, -1.0)


    def test_dominant_modulus_in_band_is_inconclusive(self, ctx1):
        D = np.diag([1.0 + 5e-7, 1e-6, 1e-6])
        D_inv = np.linalg.inv(D)
        with pytest.raises(InconclusiveSpectrumError):
            extract_pseudohyperbolic(ctx1, lambda X: D @ X, lambda X: D_inv @ X, 1.0)
