"""Exact rational intersection lattices and divisor certificates."""

import json
from fractions import Fraction

import pytest

from jflow import (
    BUILTIN_LATTICES,
    ConeError,
    Curve,
    LatticeError,
    SurfaceLattice,
    builtin_lattice,
    class_condition,
    divisor_search,
    intersect,
    lattice_from_dict,
    load_lattice,
    nakai_test,
    signature,
    verify_certificate,
)
from jflow.cone import DivisorCandidate, DivisorSearchReport


@pytest.fixture
def blowup():
    return builtin_lattice("blowup_p2_1")


@pytest.fixture
def two_blowup():
    return builtin_lattice("blowup_p2_2")


@pytest.fixture
def product():
    return builtin_lattice("product_curves")


class TestSignature:
    def test_diagonal_forms(self):
        assert signature([[1, 0], [0, -1]]) == (1, 1, 0)
        assert signature([[1, 0, 0], [0, -1, 0], [0, 0, -1]]) == (1, 2, 0)

    def test_hyperbolic_plane_zero_pivot(self):
        # both diagonal entries vanish; the inertia comes from the repaired
        # pivot e_1 + e_2 and its complement
        assert signature([[0, 1], [1, 0]]) == (1, 1, 0)

    def test_null_direction_counted(self):
        assert signature([[0, 0], [0, 5]]) == (1, 0, 1)

    def test_scaling_invariance(self):
        assert signature([[Fraction(1, 3), 0], [0, Fraction(-2, 7)]]) == (1, 1, 0)


class TestLatticeValidation:
    def test_asymmetric_rejected(self):
        with pytest.raises(LatticeError):
            SurfaceLattice(2, [[1, 2], [0, -1]], [], [1, 0])

    def test_wrong_signature_rejected(self):
        with pytest.raises(LatticeError):
            SurfaceLattice(2, [[1, 0], [0, 1]], [], [1, 0])

    def test_wrong_self_intersection_rejected(self):
        with pytest.raises(LatticeError):
            SurfaceLattice(
                2, [[1, 0], [0, -1]],
                [{"name": "E", "class": [0, 1], "self": "-2"}],
                [2, -1],
            )

    def test_non_kahler_reference_rejected(self):
        with pytest.raises(LatticeError):
            SurfaceLattice(2, [[1, 0], [0, -1]],
                           [{"name": "E", "class": [0, 1], "self": "-1"}],
                           [1, -2])

    def test_curve_lookup(self, blowup):
        e = blowup.curve("E")
        assert e.cls == (Fraction(0), Fraction(1))
        assert e.negative
        with pytest.raises(LatticeError):
            blowup.curve("F")

    def test_negative_curves(self, blowup, product):
        assert tuple(c.name for c in blowup.negative_curves()) == ("E",)
        assert product.negative_curves() == ()


class TestIntersections:
    def test_exact_fraction_arithmetic(self, blowup):
        got = intersect(blowup, [Fraction(1, 3), Fraction(1, 2)],
                        [Fraction(2), Fraction(5)])
        assert got == Fraction(2, 3) - Fraction(5, 2)
        assert isinstance(got, Fraction)

    def test_builtin_products(self, blowup):
        # line class squared is 1, exceptional class squared is -1
        assert intersect(blowup, [1, 0], [1, 0]) == 1
        assert intersect(blowup, [0, 1], [0, 1]) == -1
        assert intersect(blowup, [1, 0], [0, 1]) == 0


class TestNakai:
    def test_passing_class(self, blowup):
        rep = nakai_test(blowup, [3, -2])
        assert rep.passed
        assert rep.square == 5
        assert rep.reference_product == 4
        assert rep.curve_products == (2, 1)
        assert rep.witness is None
        assert "kahler" in rep.describe()

    def test_curve_witness(self, blowup):
        rep = nakai_test(blowup, [3, 1])
        assert not rep.passed
        assert rep.witness == ("curve", "E", -1)
        assert "curve E" in rep.describe()

    def test_square_witness(self, blowup):
        rep = nakai_test(blowup, [1, -2])
        assert not rep.passed
        assert rep.witness == ("square", -3)

    def test_reference_witness(self, blowup):
        rep = nakai_test(blowup, [-1, 0])
        assert not rep.passed
        assert rep.witness == ("reference", -2)


class TestClassCondition:
    def test_worked_pair(self, blowup):
        out = class_condition(blowup, [2, -1], [5, -1])
        assert out["c"] == Fraction(3, 8)
        assert out["target"] == (Fraction(7, 4), Fraction(1, 4))
        assert out["identity_square"] is True
        assert out["identity_mixed"] is True
        assert out["needs_divisor"] is True
        assert out["nakai"].witness == ("curve", "E", Fraction(-1, 4))

    def test_kahler_target_pair(self, blowup):
        # omega close to a multiple of chi0 keeps the target inside the cone
        out = class_condition(blowup, [4, -1], [2, -1])
        assert out["identity_square"] and out["identity_mixed"]
        if not out["needs_divisor"]:
            assert out["nakai"].passed

    def test_rejects_non_kahler_input(self, blowup):
        with pytest.raises(ConeError):
            class_condition(blowup, [3, 1], [5, -1])
        with pytest.raises(ConeError):
            class_condition(blowup, [2, -1], [1, -2])

    def test_product_lattice_never_needs_divisor(self, product):
        out = class_condition(product, [2, 3], [1, 1])
        assert out["identity_square"] and out["identity_mixed"]
        assert not out["needs_divisor"]


class TestDivisorSearch:
    def test_kahler_class_passes_through(self, blowup):
        rep = divisor_search(blowup, [3, -2])
        assert rep.status == "kahler"
        assert rep.candidate.empty
        assert rep.margin is None
        assert verify_certificate(blowup, [3, -2], rep)

    def test_worked_certificate(self, blowup):
        alpha = (3, 1)
        rep = divisor_search(blowup, alpha)
        assert rep.status == "certificate"
        assert rep.candidate.support == ("E",)
        assert rep.candidate.coefficients == (Fraction(2),)
        assert rep.remainder == (Fraction(3), Fraction(-1))
        assert rep.margin == 1
        rem = nakai_test(blowup, rep.remainder)
        assert (rem.square, rem.curve_products[0], rem.curve_products[1]) == (
            8, 1, 2
        )
        assert verify_certificate(blowup, alpha, rep)

    def test_boundary_touching_class(self, blowup):
        # alpha . E = 0 keeps E in the support with coefficient zero; the
        # margin phase then opens it to a strict certificate
        rep = divisor_search(blowup, [3, 0])
        assert rep.status == "certificate"
        assert rep.candidate.support == ("E",)
        assert rep.candidate.coefficients == (Fraction(1),)
        assert rep.remainder == (Fraction(3), Fraction(-1))
        assert verify_certificate(blowup, [3, 0], rep)

    def test_fractional_stress_pair(self, blowup):
        out = class_condition(blowup, [2, Fraction(-19, 10)], [10, -1])
        assert out["c"] == Fraction(181, 990)
        target = out["target"]
        assert target == (Fraction(164, 99), Fraction(1519, 990))
        rep = divisor_search(blowup, target)
        assert rep.status == "certificate"
        assert rep.candidate.coefficients == (Fraction(2509, 990),)
        assert rep.remainder == (Fraction(164, 99), Fraction(-1))
        assert verify_certificate(blowup, target, rep)

    def test_two_curve_support(self, two_blowup):
        # a class failing against both exceptional curves needs them both
        alpha = (4, 1, 1)
        rep = divisor_search(two_blowup, alpha)
        assert rep.status == "certificate"
        assert set(rep.candidate.support) >= {"E1", "E2"}
        assert verify_certificate(two_blowup, alpha, rep)

    def test_precondition_failure(self, blowup):
        with pytest.raises(ConeError):
            divisor_search(blowup, [0, 1])

    def test_no_negative_curves_is_honest(self, product):
        # the target here passes automatically; force a failing class that
        # the curve-free lattice cannot explain
        rep = divisor_search(product, [3, 1])
        assert rep.status == "kahler"

    def test_no_certificate_on_degenerate_support(self):
        # two proportional negative classes make the Gram matrix singular,
        # so the search must refuse rather than fabricate a certificate
        lattice = SurfaceLattice(
            2, [[1, 0], [0, -1]],
            [{"name": "E", "class": [0, 1], "self": "-1"},
             {"name": "E2", "class": [0, 2], "self": "-4"}],
            [2, -1],
        )
        rep = divisor_search(lattice, [3, 1])
        assert rep.status == "no-certificate"
        assert rep.reason != ""
        assert not verify_certificate(lattice, [3, 1], rep)


class TestVerifyCertificate:
    def test_rejects_tampered_coefficient(self, blowup):
        rep = divisor_search(blowup, [3, 1])
        bad = DivisorSearchReport(
            status="certificate",
            candidate=DivisorCandidate(support=("E",),
                                       coefficients=(Fraction(3),)),
            remainder=rep.remainder, margin=rep.margin, rounds=rep.rounds)
        assert not verify_certificate(blowup, [3, 1], bad)

    def test_rejects_tampered_remainder(self, blowup):
        rep = divisor_search(blowup, [3, 1])
        bad = DivisorSearchReport(
            status="certificate", candidate=rep.candidate,
            remainder=(Fraction(2), Fraction(-1)),
            margin=rep.margin, rounds=rep.rounds)
        assert not verify_certificate(blowup, [3, 1], bad)

    def test_rejects_nonnegative_support_curve(self, product):
        bad = DivisorSearchReport(
            status="certificate",
            candidate=DivisorCandidate(support=("F1",),
                                       coefficients=(Fraction(1),)),
            remainder=(Fraction(3), Fraction(0)), margin=Fraction(1),
            rounds=1)
        assert not verify_certificate(product, [3, 1], bad)

    def test_rejects_nonpositive_coefficient(self, blowup):
        bad = DivisorSearchReport(
            status="certificate",
            candidate=DivisorCandidate(support=("E",),
                                       coefficients=(Fraction(0),)),
            remainder=(Fraction(3), Fraction(1)), margin=Fraction(1), rounds=1)
        assert not verify_certificate(blowup, [3, 1], bad)


class TestSerialization:
    def test_builtin_names(self):
        assert set(BUILTIN_LATTICES) == {
            "blowup_p2_1", "blowup_p2_2", "product_curves"
        }
        with pytest.raises(LatticeError):
            builtin_lattice("quadric")

    def test_dict_roundtrip(self, blowup):
        back = lattice_from_dict(blowup.as_dict())
        assert back.rank == blowup.rank
        assert back.q == blowup.q
        assert back.reference_kahler == blowup.reference_kahler
        assert [c.name for c in back.curves] == [c.name for c in blowup.curves]

    def test_load_from_file(self, tmp_path, two_blowup):
        target = tmp_path / "lattice.json"
        target.write_text(json.dumps(two_blowup.as_dict()), encoding="utf-8")
        back = load_lattice(target)
        assert back.rank == 3
        assert nakai_test(back, [3, -1, -1]).passed

    def test_entry_count_validated(self):
        with pytest.raises(LatticeError):
            lattice_from_dict({"rank": 2, "Q": ["1", "0", "0"],
                               "reference_kahler": ["1", "0"]})

    def test_curve_dataclass_accepted(self):
        lattice = SurfaceLattice(
            2, [[1, 0], [0, -1]],
            [Curve(name="E", cls=(Fraction(0), Fraction(1)),
                   self_intersection=Fraction(-1))],
            [2, -1],
        )
        assert lattice.curve("E").negative
