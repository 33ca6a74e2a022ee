"""Exact intersection arithmetic on Kahler surface lattices.

Everything in this module runs on fractions.Fraction: verdicts are exact
and reproducible, never floating point.  A SurfaceLattice is a rank-r
rational intersection form together with a finite list of curve classes and
one class asserted to be Kahler.  Cone membership (positive square,
positive pairing with the reference class and with every listed curve) is
always relative to that finite curve list, which stands in for the set of
all irreducible curves; the shipped lattices have complete negative-curve
lists, arbitrary user lattices may not.

The divisor search splits a non-Kahler class with positive square into a
positive combination of negative self-intersection curves plus a remainder,
by repeatedly solving the Gram system on the curves the class currently
fails against, then inflating the coefficients by the first dyadic margin
2^-k (k ascending from 0) whose remainder passes the strict cone test.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

try:
    from importlib import resources as importlib_resources
except ImportError:  # pragma: no cover
    importlib_resources = None


class LatticeError(ValueError):
    """Malformed lattice data or operands."""


class ConeError(ValueError):
    """Inputs violate the preconditions of a cone operation."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise LatticeError(f"expected an exact rational, got {type(x).__name__}")


def _vec(xs, rank: int) -> tuple:
    v = tuple(_frac(x) for x in xs)
    if len(v) != rank:
        raise LatticeError(f"class vector has length {len(v)}, rank is {rank}")
    return v


def _fmt(q: Fraction) -> str:
    return str(q)


@dataclass(frozen=True)
class Curve:
    name: str
    cls: tuple
    self_intersection: Fraction

    @property
    def negative(self) -> bool:
        return self.self_intersection < 0


@dataclass(frozen=True)
class NakaiReport:
    passed: bool
    square: Fraction
    reference_product: Fraction
    curve_products: tuple
    witness: tuple | None

    def describe(self) -> str:
        if self.passed:
            return "kahler (relative to the curve list)"
        kind = self.witness[0]
        if kind == "square":
            return f"square {self.witness[1]} is not positive"
        if kind == "reference":
            return f"pairing {self.witness[1]} with the reference class is not positive"
        return f"pairing {self.witness[2]} with curve {self.witness[1]} is not positive"


@dataclass(frozen=True)
class DivisorCandidate:
    support: tuple
    coefficients: tuple

    @property
    def empty(self) -> bool:
        return len(self.support) == 0

    def as_dict(self) -> dict:
        return {
            "support": list(self.support),
            "coefficients": [_fmt(a) for a in self.coefficients],
        }


@dataclass(frozen=True)
class DivisorSearchReport:
    status: str  # "kahler" | "certificate" | "no-certificate"
    candidate: DivisorCandidate
    remainder: tuple
    margin: Fraction | None
    rounds: int
    reason: str = ""

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "certificate": self.candidate.as_dict(),
            "remainder": [_fmt(x) for x in self.remainder],
            "margin": None if self.margin is None else _fmt(self.margin),
            "rounds": self.rounds,
            "reason": self.reason,
        }


class SurfaceLattice:
    """Rational intersection lattice with a finite curve list."""

    def __init__(self, rank: int, q_rows: Sequence, curves: Sequence,
                 reference_kahler: Sequence, name: str = ""):
        if rank < 1:
            raise LatticeError("rank must be at least 1")
        self.rank = int(rank)
        self.name = name
        rows = [tuple(_frac(x) for x in row) for row in q_rows]
        if len(rows) != rank or any(len(r) != rank for r in rows):
            raise LatticeError("intersection matrix must be rank x rank")
        for i in range(rank):
            for j in range(rank):
                if rows[i][j] != rows[j][i]:
                    raise LatticeError("intersection matrix must be symmetric")
        self.q = tuple(rows)
        self.curves = tuple(
            Curve(name=c.name, cls=_vec(c.cls, rank),
                  self_intersection=_frac(c.self_intersection))
            if isinstance(c, Curve) else
            Curve(name=str(c["name"]), cls=_vec(c["class"], rank),
                  self_intersection=_frac(c["self"]))
            for c in curves
        )
        self.reference_kahler = _vec(reference_kahler, rank)
        self._validate()

    def _validate(self):
        pos, neg, zero = signature(self.q)
        if zero != 0 or pos != 1:
            raise LatticeError(
                f"intersection form must have signature (1, rank-1); "
                f"got ({pos}, {neg}) with {zero} null directions"
            )
        for c in self.curves:
            actual = intersect(self, c.cls, c.cls)
            if actual != c.self_intersection:
                raise LatticeError(
                    f"curve {c.name}: declared self-intersection "
                    f"{c.self_intersection}, computed {actual}"
                )
        ref = nakai_test(self, self.reference_kahler)
        if not ref.passed:
            raise LatticeError(
                f"reference class fails its own cone test: {ref.describe()}"
            )

    def negative_curves(self) -> tuple:
        return tuple(c for c in self.curves if c.negative)

    def curve(self, name: str) -> Curve:
        for c in self.curves:
            if c.name == name:
                return c
        raise LatticeError(f"no curve named {name!r}")

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "rank": self.rank,
            "Q": [_fmt(x) for row in self.q for x in row],
            "curves": [
                {"name": c.name, "class": [_fmt(x) for x in c.cls],
                 "self": _fmt(c.self_intersection)}
                for c in self.curves
            ],
            "reference_kahler": [_fmt(x) for x in self.reference_kahler],
        }


def signature(q_rows) -> tuple:
    """(positive, negative, zero) inertia of a symmetric rational matrix.

    Exact congruence diagonalization: simultaneous row and column
    elimination preserves inertia, and a zero pivot with a nonzero
    off-diagonal partner is repaired by adding that row and column, since
    (e_i + e_j)' Q (e_i + e_j) = 2 Q_ij when both diagonal entries vanish.
    """
    rank = len(q_rows)
    m = [[_frac(x) for x in row] for row in q_rows]
    pos = neg = zero = 0
    for i in range(rank):
        if m[i][i] == 0:
            swap = next((j for j in range(i + 1, rank) if m[j][j] != 0), None)
            if swap is not None:
                m[i], m[swap] = m[swap], m[i]
                for row in m:
                    row[i], row[swap] = row[swap], row[i]
            else:
                partner = next(
                    (j for j in range(i + 1, rank) if m[i][j] != 0), None)
                if partner is None:
                    zero += 1
                    continue
                for k in range(rank):
                    m[i][k] = m[i][k] + m[partner][k]
                for k in range(rank):
                    m[k][i] = m[k][i] + m[k][partner]
        pivot = m[i][i]
        if pivot == 0:
            zero += 1
            continue
        if pivot > 0:
            pos += 1
        else:
            neg += 1
        for j in range(i + 1, rank):
            factor = m[j][i] / pivot
            if factor == 0:
                continue
            for k in range(rank):
                m[j][k] = m[j][k] - factor * m[i][k]
            for k in range(rank):
                m[k][j] = m[k][j] - factor * m[k][i]
    return pos, neg, zero


def intersect(lattice: SurfaceLattice, x, y) -> Fraction:
    """x . y through the intersection form, exact."""
    xv = _vec(x, lattice.rank)
    yv = _vec(y, lattice.rank)
    total = Fraction(0)
    for i in range(lattice.rank):
        if xv[i] == 0:
            continue
        row = lattice.q[i]
        total += xv[i] * sum(row[j] * yv[j] for j in range(lattice.rank))
    return total


def nakai_test(lattice: SurfaceLattice, alpha) -> NakaiReport:
    """Strict cone membership relative to the lattice's curve list."""
    av = _vec(alpha, lattice.rank)
    square = intersect(lattice, av, av)
    ref = intersect(lattice, av, lattice.reference_kahler)
    products = tuple(intersect(lattice, av, c.cls) for c in lattice.curves)
    witness = None
    if not square > 0:
        witness = ("square", square)
    elif not ref > 0:
        witness = ("reference", ref)
    else:
        for c, p in zip(lattice.curves, products):
            if not p > 0:
                witness = ("curve", c.name, p)
                break
    return NakaiReport(passed=witness is None, square=square,
                       reference_product=ref, curve_products=products,
                       witness=witness)


def class_condition(lattice: SurfaceLattice, omega, chi0) -> dict:
    """The surface-class condition: is 2c chi0 - omega Kahler?

    c is the exact ratio (omega . chi0) / (chi0 . chi0).  Two identities
    are immediate from that definition and are re-verified exactly:
    (2c chi0 - omega)^2 = omega^2 and (2c chi0 - omega) . chi0
    = omega . chi0.
    """
    ov = _vec(omega, lattice.rank)
    cv = _vec(chi0, lattice.rank)
    for label, vec in (("omega", ov), ("chi0", cv)):
        rep = nakai_test(lattice, vec)
        if not rep.passed:
            raise ConeError(f"{label} is not Kahler here: {rep.describe()}")
    chi_sq = intersect(lattice, cv, cv)
    mixed = intersect(lattice, ov, cv)
    c = mixed / chi_sq
    target = tuple(2 * c * cv[i] - ov[i] for i in range(lattice.rank))
    identity_square = (intersect(lattice, target, target)
                       == intersect(lattice, ov, ov))
    identity_mixed = intersect(lattice, target, cv) == mixed
    report = nakai_test(lattice, target)
    return {
        "c": c,
        "target": target,
        "identity_square": identity_square,
        "identity_mixed": identity_mixed,
        "nakai": report,
        "needs_divisor": not report.passed,
    }


def _solve_exact(gram, rhs) -> list | None:
    """Gaussian elimination over the rationals; None if singular."""
    size = len(rhs)
    a = [list(gram[i]) + [rhs[i]] for i in range(size)]
    for col in range(size):
        pivot_row = next(
            (r for r in range(col, size) if a[r][col] != 0), None)
        if pivot_row is None:
            return None
        a[col], a[pivot_row] = a[pivot_row], a[col]
        pivot = a[col][col]
        for r in range(size):
            if r == col or a[r][col] == 0:
                continue
            factor = a[r][col] / pivot
            for k in range(col, size + 1):
                a[r][k] -= factor * a[col][k]
    return [a[i][size] / a[i][i] for i in range(size)]


def _negative_definite(gram) -> bool:
    """Leading principal minors of -G all positive."""
    size = len(gram)
    flipped = [[-gram[i][j] for j in range(size)] for i in range(size)]
    for k in range(1, size + 1):
        minor = _determinant([row[:k] for row in flipped[:k]])
        if not minor > 0:
            return False
    return True


def _determinant(m) -> Fraction:
    size = len(m)
    a = [list(row) for row in m]
    det = Fraction(1)
    for col in range(size):
        pivot_row = next((r for r in range(col, size) if a[r][col] != 0), None)
        if pivot_row is None:
            return Fraction(0)
        if pivot_row != col:
            a[col], a[pivot_row] = a[pivot_row], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, size):
            factor = a[r][col] / a[col][col]
            if factor != 0:
                for k in range(col, size):
                    a[r][k] -= factor * a[col][k]
    return det


MAX_MARGIN_EXPONENT = 30


def divisor_search(lattice: SurfaceLattice, alpha,
                   max_rounds: int | None = None) -> DivisorSearchReport:
    """Decompose alpha into negative curves plus a Kahler remainder.

    Preconditions are those of the underlying decomposition statement:
    alpha^2 > 0 and alpha . reference > 0.  If alpha already passes the
    cone test the certificate is empty.  Otherwise Zariski-style rounds
    build the support set, and a dyadic margin opens the remainder into the
    strict cone.  A no-certificate report means the curve list cannot
    explain the failure (typically because it is incomplete).
    """
    av = _vec(alpha, lattice.rank)
    square = intersect(lattice, av, av)
    ref = intersect(lattice, av, lattice.reference_kahler)
    if not (square > 0 and ref > 0):
        raise ConeError(
            f"divisor search needs alpha^2 > 0 and alpha . reference > 0; "
            f"got {square} and {ref}"
        )
    first = nakai_test(lattice, av)
    if first.passed:
        return DivisorSearchReport(
            status="kahler",
            candidate=DivisorCandidate(support=(), coefficients=()),
            remainder=av, margin=None, rounds=0)

    negatives = lattice.negative_curves()
    if not negatives:
        return DivisorSearchReport(
            status="no-certificate",
            candidate=DivisorCandidate(support=(), coefficients=()),
            remainder=av, margin=None, rounds=0,
            reason="class fails the cone test but the lattice lists no "
                   "negative curves")

    if max_rounds is None:
        max_rounds = 3 * len(lattice.curves) + 10

    support: list = []
    coeffs: dict = {}
    current = av
    rounds = 0
    while rounds < max_rounds:
        rounds += 1
        failing = [c for c in negatives
                   if c not in support
                   and intersect(lattice, current, c.cls) <= 0]
        support.extend(failing)
        if not support:
            break
        while True:
            gram = [[intersect(lattice, ci.cls, cj.cls) for cj in support]
                    for ci in support]
            if not _negative_definite(gram):
                return DivisorSearchReport(
                    status="no-certificate",
                    candidate=DivisorCandidate(support=(), coefficients=()),
                    remainder=av, margin=None, rounds=rounds,
                    reason="Gram matrix of the candidate support is not "
                           "negative definite; curve list is inconsistent "
                           "or incomplete")
            rhs = [intersect(lattice, av, c.cls) for c in support]
            solution = _solve_exact(gram, rhs)
            if solution is None:
                return DivisorSearchReport(
                    status="no-certificate",
                    candidate=DivisorCandidate(support=(), coefficients=()),
                    remainder=av, margin=None, rounds=rounds,
                    reason="Gram system is singular")
            # zero coefficients stay: a curve the class touches with equality
            # belongs in the support so the margin phase can open it up
            dropped = [c for c, a in zip(support, solution) if a < 0]
            if not dropped:
                coeffs = dict(zip(support, solution))
                break
            support = [c for c in support if c not in dropped]
            if not support:
                coeffs = {}
                break
        current = tuple(
            av[i] - sum(a * c.cls[i] for c, a in coeffs.items())
            for i in range(lattice.rank)
        )
        still_failing = [c for c in negatives
                         if c not in support
                         and intersect(lattice, current, c.cls) <= 0]
        if not still_failing:
            break

    if not coeffs:
        return DivisorSearchReport(
            status="no-certificate",
            candidate=DivisorCandidate(support=(), coefficients=()),
            remainder=av, margin=None, rounds=rounds,
            reason="no positive combination of listed negative curves "
                   "explains the failure")

    for k in range(MAX_MARGIN_EXPONENT + 1):
        delta = Fraction(1, 2**k)
        inflated = {c: a + delta for c, a in coeffs.items()}
        remainder = tuple(
            av[i] - sum(a * c.cls[i] for c, a in inflated.items())
            for i in range(lattice.rank)
        )
        if nakai_test(lattice, remainder).passed:
            ordered = list(inflated.items())
            candidate = DivisorCandidate(
                support=tuple(c.name for c, _ in ordered),
                coefficients=tuple(a for _, a in ordered))
            return DivisorSearchReport(
                status="certificate", candidate=candidate,
                remainder=remainder, margin=delta, rounds=rounds)

    return DivisorSearchReport(
        status="no-certificate",
        candidate=DivisorCandidate(support=(), coefficients=()),
        remainder=av, margin=None, rounds=rounds,
        reason=f"margin schedule exhausted at 2^-{MAX_MARGIN_EXPONENT}")


def verify_certificate(lattice: SurfaceLattice, alpha,
                       report: DivisorSearchReport) -> bool:
    """Independent re-check of a search result from raw products.

    Every support curve must have negative self-intersection, every
    coefficient must be positive, the stored remainder must equal
    alpha minus the divisor, and the remainder must pass the strict cone
    test.  An empty certificate verifies iff alpha itself passes.
    """
    av = _vec(alpha, lattice.rank)
    cand = report.candidate
    if cand.empty:
        return nakai_test(lattice, av).passed
    divisor = [Fraction(0)] * lattice.rank
    for name, a in zip(cand.support, cand.coefficients):
        curve = lattice.curve(name)
        if not a > 0:
            return False
        if not intersect(lattice, curve.cls, curve.cls) < 0:
            return False
        for i in range(lattice.rank):
            divisor[i] += a * curve.cls[i]
    remainder = tuple(av[i] - divisor[i] for i in range(lattice.rank))
    if remainder != tuple(report.remainder):
        return False
    return nakai_test(lattice, remainder).passed


def lattice_from_dict(data: dict) -> SurfaceLattice:
    rank = int(data["rank"])
    flat = list(data["Q"])
    if len(flat) != rank * rank:
        raise LatticeError(
            f"Q has {len(flat)} entries, expected {rank * rank}")
    rows = [flat[i * rank:(i + 1) * rank] for i in range(rank)]
    return SurfaceLattice(
        rank=rank,
        q_rows=rows,
        curves=data.get("curves", []),
        reference_kahler=data["reference_kahler"],
        name=str(data.get("name", "")),
    )


def load_lattice(path) -> SurfaceLattice:
    with open(path, "r", encoding="utf-8") as handle:
        return lattice_from_dict(json.load(handle))


BUILTIN_LATTICES = ("blowup_p2_1", "blowup_p2_2", "product_curves")


def builtin_lattice(name: str) -> SurfaceLattice:
    if name not in BUILTIN_LATTICES:
        raise LatticeError(
            f"unknown builtin lattice {name!r}; have {BUILTIN_LATTICES}")
    ref = importlib_resources.files("jflow.data.lattices") / f"{name}.json"
    return lattice_from_dict(json.loads(ref.read_text(encoding="utf-8")))
