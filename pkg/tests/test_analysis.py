import numpy as np
import pytest

from optdesign.analysis import Classification, Verdict, analyze, classify_c
from optdesign.errors import EmptyCatalogError
from optdesign.manifold import residual, with_target

from conftest import make_sphere_z, make_torus


class TestClassify:
    def test_sphere_interior_regular(self, sphere_z, sphere_z_catalog):
        assert (
            classify_c(with_target(sphere_z, 0.0), sphere_z_catalog)
            is Classification.INTERIOR_REGULAR
        )

    def test_sphere_at_max(self, sphere_z, sphere_z_catalog):
        assert classify_c(with_target(sphere_z, 1.0), sphere_z_catalog) is Classification.AT_MAX

    def test_sphere_at_min(self, sphere_z, sphere_z_catalog):
        assert classify_c(with_target(sphere_z, -1.0), sphere_z_catalog) is Classification.AT_MIN

    def test_sphere_out_of_range(self, sphere_z, sphere_z_catalog):
        assert (
            classify_c(with_target(sphere_z, 5.0), sphere_z_catalog)
            is Classification.ABOVE_RANGE
        )
        assert (
            classify_c(with_target(sphere_z, -5.0), sphere_z_catalog)
            is Classification.BELOW_RANGE
        )

    def test_torus_interior_critical(self, torus_x, torus_x_catalog):
        assert (
            classify_c(with_target(torus_x, 1.0), torus_x_catalog)
            is Classification.INTERIOR_CRITICAL
        )

    def test_torus_interior_regular(self, torus_x, torus_x_catalog):
        assert (
            classify_c(with_target(torus_x, 2.0), torus_x_catalog)
            is Classification.INTERIOR_REGULAR
        )

    def test_tolerance_band_is_relative(self, sphere_z, sphere_z_catalog):
        assert (
            classify_c(with_target(sphere_z, 1.0 + 1e-7), sphere_z_catalog)
            is Classification.AT_MAX
        )


class TestAnalyzeSphere:
    def test_solution_exists(self, sphere_z):
        report = analyze(sphere_z)
        assert report.verdict is Verdict.SOLUTION_EXISTS
        assert report.classification is Classification.AT_MAX
        assert len(report.alternatives) == 1
        assert np.allclose(report.alternatives.points[0], [0.0, 0.0, 1.0], atol=1e-6)
        assert report.alternatives.labels == (1,)

    def test_paradox_regular(self, sphere_z):
        report = analyze(with_target(sphere_z, 0.0))
        assert report.verdict is Verdict.PARADOX_REGULAR
        assert report.alternatives is None

    def test_infeasible_above_range(self, sphere_z):
        report = analyze(with_target(sphere_z, 5.0))
        assert report.verdict is Verdict.INFEASIBLE
        assert report.classification is Classification.ABOVE_RANGE
        assert len(report.alternatives) == 0

    def test_at_min_solution(self, sphere_z):
        report = analyze(with_target(sphere_z, -1.0))
        assert report.verdict is Verdict.SOLUTION_EXISTS
        assert np.allclose(report.alternatives.points[0], [0.0, 0.0, -1.0], atol=1e-6)


class TestAnalyzeTorus:
    def test_torus_z_necessary_only(self, torus_z):
        report = analyze(torus_z)
        assert report.verdict is Verdict.NECESSARY_ONLY
        assert report.classification is Classification.AT_MAX
        assert report.is_morse is False
        assert report.continuum_suspect is True

    def test_torus_x_solution(self):
        report = analyze(make_torus("x", 3.0))
        assert report.verdict is Verdict.SOLUTION_EXISTS
        assert np.allclose(report.alternatives.points[0], [3.0, 0.0, 0.0], atol=1e-6)

    def test_torus_x_suboptimal(self):
        report = analyze(make_torus("x", 1.0))
        assert report.verdict is Verdict.PARADOX_SUBOPTIMAL

    def test_torus_x_regular(self):
        report = analyze(make_torus("x", 2.0))
        assert report.verdict is Verdict.PARADOX_REGULAR


class TestAnalyzeEdgeCases:
    def test_unreachable_feasible_set(self):
        from optdesign.manifold import problem_from_strings

        prob = problem_from_strings(
            ["x", "y", "z"], [("x^2+y^2+z^2", -1.0)], "z", 5.0, box=[(-2, 2)] * 3
        )
        report = analyze(prob, n_starts=16)
        assert report.verdict is Verdict.INFEASIBLE
        assert any("unreachable" in w for w in report.warnings)

    def test_missing_target_rejected(self, sphere_z):
        from dataclasses import replace

        with pytest.raises(ValueError):
            analyze(replace(sphere_z, objective_target=None))

    def test_empty_catalog_propagates(self, sphere_z, sphere_z_catalog):
        from dataclasses import replace

        empty = replace(
            sphere_z_catalog, points=(), values=(), u_min=None, u_max=None
        )
        with pytest.raises(EmptyCatalogError):
            classify_c(sphere_z, empty)


class TestVerdictInvariants:
    def test_objective_rescaling_keeps_verdicts(self):
        from optdesign.manifold import problem_from_strings

        kappa = 3.0
        for objective, target in [("z", 1.0), ("z", 0.0), ("z", 5.0)]:
            base = problem_from_strings(
                ["x", "y", "z"], [("x^2+y^2+z^2", 1.0)], objective, target, box=[(-2, 2)] * 3
            )
            scaled = problem_from_strings(
                ["x", "y", "z"],
                [("x^2+y^2+z^2", 1.0)],
                f"{kappa}*({objective})",
                kappa * target,
                box=[(-2, 2)] * 3,
            )
            assert analyze(scaled, n_starts=256).verdict is analyze(base, n_starts=256).verdict
        for target in (3.0, 1.0, 2.0):
            base = make_torus("x", target)
            scaled = make_torus(f"{kappa}*(x)", kappa * target)
            assert analyze(scaled, n_starts=256).verdict is analyze(base, n_starts=256).verdict

    def test_at_max_midpoint_flips_to_paradox(self):
        for prob in (make_sphere_z(1.0), make_torus("x", 3.0), make_torus("z", 1.0)):
            report = analyze(prob)
            if report.classification is not Classification.AT_MAX:
                continue
            mid = (report.u_min + report.u_max) / 2.0
            flipped = analyze(with_target(prob, mid))
            assert flipped.verdict in (Verdict.PARADOX_REGULAR, Verdict.PARADOX_SUBOPTIMAL)

    def test_solution_alternatives_satisfy_all_constraints(self):
        for prob in (make_sphere_z(1.0), make_sphere_z(-1.0), make_torus("x", 3.0)):
            report = analyze(prob)
            assert report.verdict is Verdict.SOLUTION_EXISTS
            for p in report.alternatives.points:
                assert np.max(np.abs(residual(prob, p))) <= 1e-8
                assert abs(prob.objective.evaluate(p) - prob.objective_target) <= 1e-8


class TestReportSerialization:
    def test_json_fields(self, sphere_z):
        report = analyze(sphere_z)
        data = report.to_dict()
        for key in (
            "verdict",
            "classification",
            "c_m",
            "u_min",
            "u_max",
            "critical_values",
            "points",
            "is_morse",
            "warnings",
            "X",
            "labels",
            "provenance",
        ):
            assert key in data
        assert data["verdict"] == "SOLUTION_EXISTS"
        assert data["X"] == [[pytest.approx(0.0, abs=1e-6)] * 2 + [pytest.approx(1.0, abs=1e-6)]]
        point = data["points"][0]
        assert set(point) == {
            "p",
            "multipliers",
            "value",
            "kkt_residual",
            "hessian_det",
            "nondegenerate",
        }

    def test_json_deterministic(self, sphere_z):
        a = analyze(sphere_z, seed=7).to_json()
        b = analyze(sphere_z, seed=7).to_json()
        assert a == b

    def test_text_mentions_verdict(self, sphere_z):
        text = analyze(sphere_z).to_text()
        assert "SOLUTION_EXISTS" in text
        assert "label 1" in text

    def test_provenance_passthrough(self, sphere_z):
        report = analyze(sphere_z, provenance={"tol-kkt": "1e-10"})
        assert report.provenance["tol-kkt"] == "1e-10"
        assert report.provenance["seed"] == sphere_z.seed
