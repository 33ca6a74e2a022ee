"""Deterministic random sampling and the property suites."""

import numpy as np
import pytest

from jflow import (
    TorusGrid,
    builtin_lattice,
    make_rng,
    nakai_test,
    random_admissible_potential,
    report_digest,
    run_property_suites,
)
from jflow.sampling import (
    FAULTS,
    canonical_json,
    random_positive_pair,
    random_positive_pair_batch,
    random_rational_class,
    suite_conditions,
    suite_cone,
    suite_functionals,
    wavevector_representatives,
)
from jflow.torus import field_mean, metric_field


class TestGenerators:
    def test_rng_reproducible(self):
        a = make_rng(7, 3).standard_normal(5)
        b = make_rng(7, 3).standard_normal(5)
        assert np.array_equal(a, b)

    def test_rng_streams_differ(self):
        a = make_rng(7, 0).standard_normal(5)
        b = make_rng(7, 1).standard_normal(5)
        assert not np.allclose(a, b)

    def test_positive_pair_batch(self):
        g, chi = random_positive_pair_batch(make_rng(1), 3, 20)
        assert g.shape == (20, 3, 3)
        assert chi.shape == (20, 3, 3)
        assert np.all(np.linalg.eigvalsh(g) > 0)
        assert np.all(np.linalg.eigvalsh(chi) > 0)

    def test_positive_pair_scalar(self):
        g, chi = random_positive_pair(make_rng(2), 2)
        assert g.shape == (2, 2)
        assert np.linalg.eigvalsh(chi)[0] > 0

    def test_batch_produces_both_verdicts(self):
        # the chi scaling must leave both passing and failing samples for
        # every dimension the suites exercise
        from jflow.hermitian import condition_margins_batch, pencil_eigenvalues_batch

        for n in (2, 3, 4):
            g, chi = random_positive_pair_batch(make_rng(11, n), n, 400)
            lam = pencil_eigenvalues_batch(g, chi)
            c2 = condition_margins_batch(lam)["C2"] > 0
            assert 0 < int(c2.sum()) < 400

    def test_wavevector_representatives(self):
        reps = wavevector_representatives(2, 1)
        assert len(reps) == 4
        for k in reps:
            assert tuple(-c for c in k) not in reps

    def test_admissible_potential_margin(self):
        grid = TorusGrid(n=2, points=16)
        chi0 = np.array([[1.4, 0.25], [0.25, 1.0]])
        rng = make_rng(5, 1)
        lam0 = float(np.linalg.eigvalsh(chi0).min())
        for _ in range(10):
            phi = random_admissible_potential(rng, grid, chi0, band=2,
                                              rel_margin=0.25)
            assert abs(field_mean(phi, grid)) < 1e-12
            metric = metric_field(grid, chi0, phi)
            lam_min = float(metric.relative_eigenvalues(np.eye(2)).min())
            # the Weyl bound is conservative, so the actual margin clears
            # the requested floor
            assert lam_min >= 0.25 * lam0 - 1e-12

    def test_rational_class_default_predicate(self):
        lattice = builtin_lattice("blowup_p2_1")
        vec = random_rational_class(make_rng(3), lattice)
        assert vec is not None
        assert nakai_test(lattice, vec).passed

    def test_rational_class_can_exhaust(self):
        # no failing class with positive square exists without negative
        # curves on this lattice, so the draw must give up cleanly
        from jflow.sampling import _is_failing_with_positive_square

        product = builtin_lattice("product_curves")
        vec = random_rational_class(make_rng(4), product, tries=50,
                                    predicate=_is_failing_with_positive_square)
        assert vec is None


class TestSuites:
    def test_conditions_suite_passes(self):
        report = suite_conditions(seed=42, samples=300, dims=(2, 3),
                                  cone_dims=(2, 3))
        assert report["passed"]
        assert report["counterexamples"] == []
        for stats in report["per_dim"].values():
            assert stats["chain_violations"] == 0
            assert stats["cone_disagreements"] == 0
            assert 0 < stats["c1_pass"]

    def test_conditions_fault_detected(self):
        report = suite_conditions(seed=42, samples=2000, dims=(2, 3),
                                  cone_dims=(), fault="c2-sign")
        assert not report["passed"]
        assert report["counterexamples"]
        props = {c["property"] for c in report["counterexamples"]}
        assert props & {"c2-implies-c3", "n2-verdict-equality"}

    def test_unknown_fault_rejected(self):
        with pytest.raises(ValueError):
            suite_conditions(seed=1, samples=10, fault="c3-sign")

    def test_functionals_suite_passes(self):
        report = suite_functionals(seed=42, count=12)
        assert report["passed"]
        assert report["failure_count"] == 0
        assert report["gaps"]["ie_routes"] <= 1e-8
        assert report["gaps"]["entropy_min"] >= -1e-6
        assert report["gaps"]["sandwich_low"] >= -1e-12

    def test_functionals_count_validated(self):
        with pytest.raises(ValueError):
            suite_functionals(seed=1, count=0)

    def test_cone_suite_passes(self):
        report = suite_cone(seed=42, count=30)
        assert report["passed"]
        assert report["identity_failures"] == 0
        assert report["verify_failures"] == 0
        assert report["no_certificate"] == 0
        assert report["certificates"] > 0
        assert report["product_always_kahler"]

    def test_run_property_suites_sizes_validated(self):
        with pytest.raises(ValueError):
            run_property_suites(1, sizes={"flow": 10})

    def test_report_digest_deterministic(self):
        sizes = {"conditions": 200, "functionals": 5, "cone": 20}
        a = run_property_suites(42, sizes=sizes)
        b = run_property_suites(42, sizes=sizes)
        assert canonical_json(a) == canonical_json(b)
        assert report_digest(a) == report_digest(b)
        assert a["all_passed"]

    def test_report_digest_seed_sensitivity(self):
        sizes = {"conditions": 100, "functionals": 2, "cone": 10}
        a = run_property_suites(42, sizes=sizes)
        b = run_property_suites(43, sizes=sizes)
        assert report_digest(a) != report_digest(b)

    def test_canonical_json_is_order_insensitive(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == canonical_json(
            {"a": [1, 2], "b": 1}
        )

    def test_fault_propagates_to_combined_report(self):
        sizes = {"conditions": 2000, "functionals": 1, "cone": 2}
        report = run_property_suites(42, sizes=sizes, fault="c2-sign")
        assert report["fault"] == "c2-sign"
        assert not report["all_passed"]
        assert FAULTS == ("c2-sign",)
