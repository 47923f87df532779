import json

import numpy as np
import pytest

from optdesign.errors import ProjectionError, SchemaError
from optdesign.manifold import (
    check_cq,
    jacobian_y,
    load_problem,
    problem_from_dict,
    problem_from_strings,
    problem_to_dict,
    project_to_y,
    residual,
    save_problem,
)


class TestValidation:
    def test_too_many_constraints_rejected(self):
        with pytest.raises(SchemaError, match="smaller"):
            problem_from_strings(
                ["x", "y"], [("x", 0.0), ("y", 0.0)], "x + y", 0.0
            )

    def test_missing_constraints_rejected(self):
        with pytest.raises(SchemaError):
            problem_from_strings(["x", "y"], [], "x", 0.0)

    def test_empty_box_interval_rejected(self):
        with pytest.raises(SchemaError, match="box"):
            problem_from_strings(
                ["x", "y", "z"], [("x^2+y^2+z^2", 1.0)], "z", 1.0,
                box=[(1, -1), (-1, 1), (-1, 1)],
            )

    def test_default_box(self):
        prob = problem_from_strings(["x", "y", "z"], [("x^2+y^2+z^2", 1.0)], "z", 1.0)
        assert prob.box == ((-10.0, 10.0),) * 3

    def test_counts(self, sphere_z):
        assert sphere_z.n == 3
        assert sphere_z.m == 2


class TestSchema:
    def test_round_trip(self, tmp_path, sphere_z):
        path = tmp_path / "p.json"
        save_problem(sphere_z, path)
        again = load_problem(path)
        assert again.variables == sphere_z.variables
        assert again.objective_target == 1.0
        assert again.box == sphere_z.box
        assert again.seed == sphere_z.seed
        p = np.array([0.3, -0.2, 0.8])
        assert residual(again, p) == pytest.approx(residual(sphere_z, p))

    def test_seed_defaults_to_42(self):
        prob = problem_from_dict(
            {
                "variables": ["x", "y", "z"],
                "constraints": [{"g": "x^2+y^2+z^2", "c": 1}],
                "objective": {"g": "z", "c": 1},
            }
        )
        assert prob.seed == 42

    def test_provenance_passthrough(self, tmp_path, sphere_z):
        path = tmp_path / "p.json"
        save_problem(sphere_z, path, provenance={"note": "test"})
        raw = json.loads(path.read_text())
        assert raw["provenance"] == {"note": "test"}
        load_problem(path)  # extra key is tolerated

    def test_missing_field(self):
        with pytest.raises(SchemaError):
            problem_from_dict({"variables": ["x", "y"], "objective": {"g": "x", "c": 0}})

    def test_bad_json_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(SchemaError):
            load_problem(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            load_problem(tmp_path / "nope.json")

    def test_to_dict_contains_schema_fields(self, sphere_z):
        data = problem_to_dict(sphere_z)
        assert set(data) == {"variables", "constraints", "objective", "box", "seed"}


class TestResidual:
    def test_sphere_on_surface(self, sphere_z):
        assert residual(sphere_z, [0.0, 0.0, 1.0]) == pytest.approx([0.0])

    def test_sphere_off_surface(self, sphere_z):
        assert residual(sphere_z, [0.0, 0.0, 2.0]) == pytest.approx([3.0])

    def test_torus_on_surface(self, torus_x):
        assert residual(torus_x, [3.0, 0.0, 0.0]) == pytest.approx([0.0])


class TestJacobian:
    def test_sphere(self, sphere_z):
        assert np.array_equal(jacobian_y(sphere_z, [0.0, 0.0, 1.0]), [[0.0, 0.0, 2.0]])

    def test_torus(self, torus_x):
        assert np.allclose(jacobian_y(torus_x, [3.0, 0.0, 0.0]), [[48.0, 0.0, 0.0]])

    def test_constant_constraints_give_zero_matrix(self):
        prob = problem_from_strings(["x", "y", "z"], [("5", 5.0)], "z", 1.0)
        assert np.array_equal(jacobian_y(prob, [1.0, 2.0, 3.0]), np.zeros((1, 3)))

    def test_rows_match_gradients(self, torus_x):
        p = np.array([2.1, 0.7, -0.4])
        jac = jacobian_y(torus_x, p)
        for i, (expr, _) in enumerate(torus_x.constraints):
            assert np.array_equal(jac[i], expr.gradient(p))


class TestCheckCq:
    def test_sphere_full_rank(self, sphere_z):
        report = check_cq(sphere_z, [0.0, 0.0, 1.0])
        assert report.singular_values == pytest.approx((2.0,))
        assert report.full_rank

    def test_torus_full_rank(self, torus_x):
        report = check_cq(torus_x, [3.0, 0.0, 0.0])
        assert report.singular_values == pytest.approx((48.0,))
        assert report.full_rank

    def test_duplicated_constraint_fails(self):
        prob = problem_from_strings(
            ["x", "y", "z", "w"],
            [("x^2+y^2+z^2", 1.0), ("x^2+y^2+z^2", 1.0)],
            "z",
            1.0,
        )
        report = check_cq(prob, [0.0, 0.0, 1.0, 0.0])
        assert report.singular_values[1] == pytest.approx(0.0, abs=1e-12)
        assert not report.full_rank

    def test_rescaling_invariance(self):
        base = problem_from_strings(["x", "y", "z"], [("x^2+y^2+z^2", 1.0)], "z", 1.0)
        scaled = problem_from_strings(["x", "y", "z"], [("10*(x^2+y^2+z^2)", 10.0)], "z", 1.0)
        p = [0.0, 0.0, 1.0]
        assert check_cq(base, p).full_rank == check_cq(scaled, p).full_rank

    def test_infeasible_point_rejected(self, sphere_z):
        with pytest.raises(ValueError, match="feasible"):
            check_cq(sphere_z, [0.0, 0.0, 2.0])


class TestProjection:
    def test_radial(self, sphere_z):
        fp = project_to_y(sphere_z, [0.0, 0.0, 2.0])
        assert np.allclose(fp.p, [0.0, 0.0, 1.0], atol=1e-9)
        assert fp.residual_norm <= 1e-9

    def test_already_feasible_needs_zero_iterations(self, sphere_z):
        fp = project_to_y(sphere_z, [0.0, 0.0, 1.0])
        assert fp.iterations == 0
        assert np.array_equal(fp.p, [0.0, 0.0, 1.0])

    def test_vanishing_jacobian_fails(self, sphere_z):
        with pytest.raises(ProjectionError) as err:
            project_to_y(sphere_z, [0.0, 0.0, 0.0])
        assert err.value.rank_deficient

    def test_unreachable_set_reports_last_residual(self):
        prob = problem_from_strings(["x", "y", "z"], [("x^2+y^2+z^2", -1.0)], "z", 0.0)
        with pytest.raises(ProjectionError) as err:
            project_to_y(prob, [0.5, 0.5, 0.5])
        assert err.value.residual_norm > 0.5

    def test_random_starts_land_on_torus(self, torus_x):
        rng = np.random.default_rng(5)
        for _ in range(20):
            fp = project_to_y(torus_x, rng.uniform(-4, 4, size=3))
            assert fp.residual_norm <= 1e-9
