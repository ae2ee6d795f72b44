"""Tests for affine deformations, the fundamental domain and point tracing."""

import numpy as np
import pytest

from affine_schottky import affine
from affine_schottky.affine import (
    RegionKind,
    TraceStatus,
    build_deformation,
    canonical_translations,
    classify_point,
    classify_points,
    cone_membership,
    gap_sequence,
    in_T,
    q_orthogonal_complement,
    quotient_report,
    solve_center,
    trace_point,
    verify_affine_ping_pong,
    verify_angle_control,
)
from affine_schottky.errors import CenterEquationError, DimensionMismatchError, UncertifiedError
from affine_schottky.mtis import mtis_from_map, random_orthogonal_map
from affine_schottky.words import Letter


def _e(deformation, i=0):
    return deformation.group.generators[i].frame.e_eq


def _ball(deformation, count, seed):
    """Uniform points in the ball of radius 10 max |t_i|."""
    dim = deformation.ctx.dim
    radius = 10.0 * float(np.max(np.linalg.norm(deformation.translations, axis=1)))
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((count, dim))
    X *= (radius * rng.random(count) ** (1.0 / dim) / np.linalg.norm(X, axis=1))[:, None]
    return X


class TestCenters:
    def test_canonical_centers_are_fixed_vectors(self, deformation_d1):
        for i in range(deformation_d1.n):
            assert np.allclose(deformation_d1.centers[i], _e(deformation_d1, i), atol=1e-10)

    def test_center_equation(self, demo_map1):
        t = np.array([1.0, -2.0, 0.5])
        u = solve_center(demo_map1.matrix, t)
        assert np.allclose(u + demo_map1.matrix @ u, t, atol=1e-8)

    def test_singular_center_equation(self):
        with pytest.raises(CenterEquationError):
            solve_center(-np.eye(3), np.ones(3))

    def test_translation_shape(self, group_d1):
        with pytest.raises(DimensionMismatchError):
            build_deformation(group_d1, np.zeros((1, 3)))

    def test_affine_inverse(self, deformation_d1):
        X = np.random.default_rng(0).standard_normal((5, 3))
        gamma, gamma_inv = deformation_d1.gammas[1], deformation_d1.gamma_inverses[1]
        assert np.allclose(gamma_inv(gamma(X)), X, atol=1e-8)


class TestAdmissibility:
    def test_canonical_translations_are_admissible(self, deformation_d1):
        report = deformation_d1.in_t
        assert report.inside
        assert report.d_min > 0
        assert report.asymptotic_gap == pytest.approx(np.pi / 6 - 0.5, abs=1e-9)

    def test_zero_translations_are_not(self, certified_d1):
        deformation = build_deformation(certified_d1, np.zeros((2, 3)))
        report = in_T(deformation, samples=100)
        assert not report.inside
        assert "apex" in report.reason
        assert report.to_dict()["witness"] is not None

    def test_apex_only_in_closure(self, deformation_d1):
        apex = deformation_d1.centers[0]
        assert not cone_membership(deformation_d1, 0, 1, apex)
        assert cone_membership(deformation_d1, 0, 1, apex, closed=True)
        assert cone_membership(deformation_d1, 0, 1, 3 * apex)

    def test_affine_ping_pong(self, deformation_d1):
        result = verify_affine_ping_pong(deformation_d1, samples=500)
        assert result["passed"]
        assert all(entry["samples"] > 0 for entry in result["generators"])


class TestClassification:
    def test_origin_is_in_fundamental_domain(self, deformation_d1):
        assert classify_point(deformation_d1, np.zeros(3)).kind is RegionKind.H0

    def test_far_point_along_fixed_line(self, deformation_d1):
        result = classify_point(deformation_d1, 4 * _e(deformation_d1))
        assert result.kind is RegionKind.TILDE
        assert result.region == (0, 1)

    def test_apex_of_minus_cone_is_boundary(self, deformation_d1):
        result = classify_point(deformation_d1, -_e(deformation_d1))
        assert result.kind is RegionKind.BOUNDARY

    def test_batch_matches_single(self, deformation_d1):
        X = np.vstack([np.zeros(3), 4 * _e(deformation_d1), -4 * _e(deformation_d1)])
        batch = classify_points(deformation_d1, X)
        assert batch.kinds.tolist() == ["H0", "tilde", "tilde"]
        assert batch.region_of(2) == (0, -1)
        assert batch.region_of(0) is None

    def test_regions_are_exclusive(self, deformation_d1):
        batch = classify_points(deformation_d1, _ball(deformation_d1, 10_000, seed=11))
        counts = batch.claims.sum(axis=1)
        assert counts.max() <= 1
        assert (counts[batch.kinds == "tilde"] == 1).all()
        assert (counts[batch.kinds == "H0"] == 0).all()
        assert {"H0", "tilde"} <= set(batch.kinds.tolist())


class TestTracing:
    def test_origin_lands_immediately(self, deformation_d1):
        trace = trace_point(deformation_d1, np.zeros(3))
        assert trace.status is TraceStatus.LANDED
        assert trace.letters == []
        assert str(trace.word) == "e"

    def test_point_on_fixed_line(self, deformation_d1):
        trace = trace_point(deformation_d1, 4 * _e(deformation_d1))
        assert trace.status is TraceStatus.LANDED
        assert trace.letters == [Letter(0, 1), Letter(0, 1)]
        assert np.allclose(trace.points[-1], 0.0, atol=1e-8)

    def test_opposite_point(self, deformation_d1):
        trace = trace_point(deformation_d1, -4 * _e(deformation_d1))
        assert trace.status is TraceStatus.LANDED
        assert str(trace.word) == "AA"

    def test_budget(self, deformation_d1):
        trace = trace_point(deformation_d1, 4 * _e(deformation_d1), max_steps=1)
        assert trace.status is TraceStatus.BUDGET_EXHAUSTED
        assert len(trace.letters) == 1

    def test_boundary_start(self, deformation_d1):
        trace = trace_point(deformation_d1, -_e(deformation_d1))
        assert trace.status is TraceStatus.BOUNDARY
        assert trace.boundary_step == 0

    def test_dimension(self, deformation_d1):
        with pytest.raises(DimensionMismatchError):
            trace_point(deformation_d1, np.zeros(2))

    def test_random_points_stay_reduced(self, deformation_d1):
        rng = np.random.default_rng(5)
        for x in rng.uniform(-20, 20, (30, 3)):
            trace = trace_point(deformation_d1, x)
            assert trace.word.is_reduced
            if trace.status is TraceStatus.LANDED:
                assert classify_point(deformation_d1, trace.points[-1]).kind is RegionKind.H0

    @pytest.mark.slow
    def test_ball_points_land(self, deformation_d1):
        traces = [trace_point(deformation_d1, x) for x in _ball(deformation_d1, 1000, seed=7)]
        stuck = [t.x0.tolist() for t in traces if t.status is not TraceStatus.LANDED]
        assert not stuck
        assert max(len(t.letters) for t in traces) <= 60


class TestGapSequence:
    def test_one_entry_per_letter(self, deformation_d1):
        trace = trace_point(deformation_d1, 4 * _e(deformation_d1), gap_rays=16)
        report = trace.gaps
        assert len(report.entries) == 2
        assert not report.relabeled
        assert np.isnan(report.entries[0].delta_k)
        assert report.entries[1].cyclic
        assert np.isfinite(report.entries[1].delta_k)

    def test_empty_trace(self, deformation_d1):
        trace = trace_point(deformation_d1, np.zeros(3))
        report = gap_sequence(deformation_d1, trace, rays=8)
        assert report.entries == []
        assert np.isnan(report.delta_floor)

    def test_relabeled_first_letter(self, deformation_d1):
        trace = trace_point(deformation_d1, -4 * _e(deformation_d1), gap_rays=8)
        assert trace.gaps.relabeled

    @pytest.mark.parametrize("generator", [0, 1])
    @pytest.mark.parametrize("multiple", [4, -4, 6, -6])
    def test_heights_rise_along_fixed_lines(self, deformation_d1, generator, multiple):
        trace = trace_point(deformation_d1, multiple * _e(deformation_d1, generator), gap_rays=16)
        assert trace.status is TraceStatus.LANDED
        assert len(trace.letters) == abs(multiple) // 2
        assert trace.gaps.monotone
        assert trace.gaps.delta_floor > 0

    def test_heights_see_past_a_hole(self, deformation_d1, monkeypatch):
        trace = trace_point(deformation_d1, 4 * _e(deformation_d1))
        x0 = trace.x0
        N0 = deformation_d1.ctx.form_N0()

        def two_shells(deformation, prefix, nxt, P):
            r = N0.norms(P - x0)
            return (r <= 1.0) | ((r >= 5.0) & (r <= 8.0))

        monkeypatch.setattr(affine, "_prefix_member", two_shells)
        report = gap_sequence(deformation_d1, trace, rays=16)
        assert len(report.entries) == 2
        # first exit would stop at the inner shell
        assert all(entry.a_k < -1.5 for entry in report.entries)
        assert all(entry.a_k >= -8.0 - 1e-6 for entry in report.entries)


class TestQuotient:
    def test_report(self, deformation_d1):
        report = quotient_report(deformation_d1)
        assert report["dimension"] == 3
        assert report["handles"] == 2
        assert len(report["identifications"]) == 2

    def test_uncertified_group(self, group_d1):
        deformation = build_deformation(group_d1, canonical_translations(group_d1))
        with pytest.raises(UncertifiedError):
            quotient_report(deformation)

    def test_unchecked_translations(self, certified_d1):
        deformation = build_deformation(certified_d1, canonical_translations(certified_d1))
        with pytest.raises(UncertifiedError):
            quotient_report(deformation)


class TestAngleControl:
    @pytest.mark.parametrize("fixture", ["ctx1", "ctx3"])
    def test_identities_hold(self, request, fixture):
        ctx = request.getfixturevalue(fixture)
        result = verify_angle_control(ctx, samples=20, seed=1)
        assert result["passed"]
        assert result["draws"] == 20

    def test_complement_contains_subspace(self, ctx3):
        V = mtis_from_map(ctx3, random_orthogonal_map(3, np.random.default_rng(2)))
        complement = q_orthogonal_complement(ctx3, V.subspace)
        assert complement.dim == 4
        assert np.abs(complement.basis.T @ ctx3.gram_Q @ V.basis).max() < 1e-10
