import numpy as np
import pytest

from optdesign.errors import UnknownAlternativeError
from optdesign.scf import (
    FiniteAlternatives,
    audit_rule,
    build_scf,
    scf_axiom_audit,
)


@pytest.fixture
def abc():
    # Lexicographic order assigns labels a=1, b=2, c=3.
    return FiniteAlternatives.from_points(
        [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([2.0, 5.0])]
    )


class TestFiniteAlternatives:
    def test_labels_follow_lexicographic_order(self):
        fx = FiniteAlternatives.from_points([[2.0, 0.0], [0.0, 1.0], [0.0, 0.5]])
        assert fx.labels == (1, 2, 3)
        assert [tuple(p) for p in fx.points] == [(0.0, 0.5), (0.0, 1.0), (2.0, 0.0)]

    def test_empty(self):
        fx = FiniteAlternatives.from_points([])
        assert len(fx) == 0


class TestHighestLabelRule:
    def test_highest_label_wins(self, abc):
        rule = build_scf(abc)
        a, b, c = abc.points
        assert np.array_equal(rule(a, c, b), c)

    def test_unanimity(self, abc):
        rule = build_scf(abc)
        b = abc.points[1]
        assert np.array_equal(rule(b, b, b), b)

    def test_anonymity_pairs(self, abc):
        rule = build_scf(abc)
        a, _, c = abc.points
        assert np.array_equal(rule(c, a), rule(a, c))
        assert np.array_equal(rule(a, c), c)

    def test_snap_tolerance(self, abc):
        rule = build_scf(abc)
        a = abc.points[0]
        nudged = a + 1e-9
        assert np.array_equal(rule(nudged), a)

    def test_far_input_rejected(self, abc):
        rule = build_scf(abc)
        with pytest.raises(UnknownAlternativeError):
            rule(np.array([0.5, 0.5]))

    def test_profile_matrix_form(self, abc):
        rule = build_scf(abc)
        profile = np.vstack([abc.points[0], abc.points[2]])
        assert np.array_equal(rule(profile), abc.points[2])

    def test_empty_alternatives_rejected(self):
        with pytest.raises(ValueError):
            build_scf(FiniteAlternatives.from_points([]))


class TestAudit:
    def test_single_alternative_trivial(self):
        fx = FiniteAlternatives.from_points([[1.0, 2.0]])
        audit = scf_axiom_audit(fx, k_max=4)
        assert audit.passed
        assert audit.unanimity_failures == 0 and audit.anonymity_failures == 0

    def test_three_alternatives_exhaustive_counts(self, abc):
        audit = scf_axiom_audit(abc, k_max=3)
        assert audit.passed
        k3 = audit.per_k[2]
        assert k3.agents == 3
        assert k3.anonymity_checks == 27 * 6
        assert k3.anonymity_failures == 0
        assert k3.unanimity_checks == 3
        assert k3.unanimity_failures == 0
        assert "finite" in audit.continuity_note

    def test_dictatorship_fails_anonymity(self, abc):
        first_argument_dictatorship = lambda *choices: np.asarray(choices[0])
        audit = audit_rule(first_argument_dictatorship, abc.points, k_max=2)
        assert audit.anonymity_failures > 0
        assert audit.unanimity_failures == 0
        assert not audit.passed

    def test_bounds(self, abc):
        with pytest.raises(ValueError):
            audit_rule(build_scf(abc), [np.zeros(2)] * 9, k_max=2)
        with pytest.raises(ValueError):
            audit_rule(build_scf(abc), abc.points, k_max=5)

    def test_highest_label_rule_passes_up_to_five_alternatives(self):
        rng = np.random.default_rng(77)
        for size in range(1, 6):
            fx = FiniteAlternatives.from_points(rng.uniform(-3, 3, size=(size, 3)))
            audit = scf_axiom_audit(fx, k_max=3)
            assert audit.passed, size
