"""Energy functionals of the potential: path integrals and closed forms.

Conventions.  Every top-degree integral is represented as a density against
Lebesgue measure dV on the torus (total mass (2pi)^{2n}): chi^n/n! becomes
det(chi), omega wedge chi^{n-1}/(n-1)! becomes (trace of omega against
chi^{-1}) times det(chi), and a general n-fold wedge product of (1,1)-forms
becomes its permutation-sum coefficient W divided by n!.  A single global
factor 2^n relating dz dzbar to dx dy is dropped everywhere; it cancels in
every ratio, identity, and inequality below.

Path functionals integrate over the segment phi_t = f(t) phi with
chi_t = chi0 + f(t) * i ddbar(phi).  Since f maps [0,1] into [0,1], every
chi_t is a convex combination of chi0 and chi_phi, so interior admissibility
follows from endpoint admissibility.  Quadrature is the trapezoid rule on
2M+1 nested nodes with one Richardson extrapolation step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .hermitian import ShapeError, as_matrix, wedge_coefficient_batch
from .torus import (
    MetricField,
    TorusGrid,
    class_constant_c,
    complex_hessian_of,
    gradient,
    integrate_top,
    metric_field,
    scalar_curvature,
)

PATH_KINDS = ("linear", "quadratic", "custom")


@dataclass(frozen=True)
class PathSpec:
    """Path phi_t = f(t) phi from 0 to phi, with quadrature resolution.

    linear: f(t) = t.  quadratic: f(t) = t^2.  custom: user-supplied f and
    f' (still of the scaling form, so admissibility along the segment needs
    f([0,1]) within [0,1]; this is checked on the quadrature nodes).
    steps is the coarse trapezoid count M; evaluation uses 2M+1 nodes plus
    Richardson extrapolation.
    """

    kind: str = "linear"
    steps: int = 64
    weight_fn: Callable | None = None
    rate_fn: Callable | None = None

    def __post_init__(self):
        if self.kind not in PATH_KINDS:
            raise ShapeError(f"path kind must be one of {PATH_KINDS}")
        if self.steps < 16:
            raise ShapeError("need at least 16 quadrature steps")
        if self.kind == "custom" and (self.weight_fn is None or self.rate_fn is None):
            raise ShapeError("custom paths need weight_fn and rate_fn")

    def weight(self, t: float) -> float:
        if self.kind == "linear":
            return t
        if self.kind == "quadratic":
            return t * t
        return float(self.weight_fn(t))

    def rate(self, t: float) -> float:
        if self.kind == "linear":
            return 1.0
        if self.kind == "quadratic":
            return 2.0 * t
        return float(self.rate_fn(t))


def _quadrature_nodes(path: PathSpec) -> np.ndarray:
    return np.linspace(0.0, 1.0, 2 * path.steps + 1)


def _trapezoid(values: np.ndarray, dx: float) -> float:
    return float(dx * (values.sum() - 0.5 * (values[0] + values[-1])))


def _richardson(values: np.ndarray) -> float:
    """Trapezoid on all nodes and on every second node, extrapolated."""
    m2 = values.shape[0] - 1
    fine = _trapezoid(values, 1.0 / m2)
    coarse = _trapezoid(values[::2], 2.0 / m2)
    return float(fine + (fine - coarse) / 3.0)


def mixed_density(mats: list, grid: TorusGrid) -> np.ndarray:
    """Pointwise W(A_1,...,A_n)/n! for stacks of (1,1)-form coefficients.

    For a single repeated positive form this is its determinant field, so
    the output integrates like chi^n/n!.
    """
    n = grid.n
    out = wedge_coefficient_batch(mats, n) / math.factorial(n)
    return out


def volume_of(chi0, grid: TorusGrid) -> float:
    """V = integral of chi0^n/n! for a constant background form."""
    m = as_matrix(chi0)
    det = float(np.linalg.det(m).real)
    return det * grid.volume


def dz_gradient(phi: np.ndarray, grid: TorusGrid, deriv: str = "fd4") -> list:
    """Holomorphic first derivatives f_a = d phi / dz_a on the grid."""
    du = gradient(phi, grid, deriv)
    n = grid.n
    if grid.mode == "invariant":
        return [0.5 * du[a] for a in range(n)]
    return [0.5 * (du[a] - 1j * du[n + a]) for a in range(n)]


def dbar_energy_matrix(phi: np.ndarray, grid: TorusGrid,
                       deriv: str = "fd4") -> np.ndarray:
    """Coefficient stack P_ab = f_a conj(f_b) of sqrt(-1) dphi wedge dbarphi."""
    f = dz_gradient(phi, grid, deriv)
    n = grid.n
    if grid.mode == "invariant":
        p = np.empty(grid.shape + (n, n))
        for a in range(n):
            for b in range(n):
                p[..., a, b] = f[a] * f[b]
        return p
    p = np.empty(grid.shape + (n, n), dtype=np.complex128)
    for a in range(n):
        for b in range(n):
            p[..., a, b] = f[a] * np.conj(f[b])
    return p


def _path_samples(grid: TorusGrid, chi0, hessian: np.ndarray, path: PathSpec,
                  kernel: Callable) -> np.ndarray:
    """kernel(t, metric) on every quadrature node; raises if a node loses
    positivity (cannot happen for f in [0,1] with admissible endpoints)."""
    ts = _quadrature_nodes(path)
    vals = np.empty(ts.shape[0])
    for j, t in enumerate(ts):
        f = path.weight(float(t))
        metric = MetricField(grid, chi0, f * hessian)
        vals[j] = kernel(float(t), metric)
    return vals


def eval_J(grid: TorusGrid, omega, chi0, phi: np.ndarray,
           path: PathSpec = PathSpec(), deriv: str = "fd4") -> float:
    """J(phi) = int_0^1 int phidot_t (omega wedge chi_t^{n-1}/(n-1)!) dt."""
    hessian = complex_hessian_of(phi, grid, deriv)
    om = as_matrix(omega)

    def kernel(t, metric):
        dens = metric.trace_with(om) * metric.det()
        return path.rate(t) * integrate_top(phi * dens, grid)

    return _richardson(_path_samples(grid, chi0, hessian, path, kernel))


def eval_I(grid: TorusGrid, chi0, phi: np.ndarray,
           path: PathSpec = PathSpec(), deriv: str = "fd4") -> float:
    """I(phi) = int_0^1 int phidot_t chi_t^n/n! dt."""
    hessian = complex_hessian_of(phi, grid, deriv)

    def kernel(t, metric):
        return path.rate(t) * integrate_top(phi * metric.det(), grid)

    return _richardson(_path_samples(grid, chi0, hessian, path, kernel))


def eval_Jhat(grid: TorusGrid, omega, chi0, phi: np.ndarray,
              path: PathSpec = PathSpec(), deriv: str = "fd4") -> float:
    """Jhat = J - nc I, the normalized functional the flow descends.

    Its integrand is phidot_t (Lambda_{chi_t} omega - nc) det chi_t, so
    shifting phi by a constant changes nothing: the shift contributes the
    t-integral of int (Lambda - nc) det chi_t dV, which vanishes because nc
    is exactly the class ratio.
    """
    bundle = flow_functional_bundle(grid, omega, chi0, phi, path=path,
                                    deriv=deriv)
    return bundle["Jhat"]


def flow_functional_bundle(grid: TorusGrid, omega, chi0, phi: np.ndarray,
                           c: float | None = None,
                           path: PathSpec = PathSpec(),
                           deriv: str = "fd4") -> dict:
    """J, I, and Jhat from one shared sweep over the quadrature nodes."""
    hessian = complex_hessian_of(phi, grid, deriv)
    om = as_matrix(omega)
    if c is None:
        c = class_constant_c(omega, chi0)
    ts = _quadrature_nodes(path)
    jvals = np.empty(ts.shape[0])
    ivals = np.empty(ts.shape[0])
    for k, t in enumerate(ts):
        f = path.weight(float(t))
        metric = MetricField(grid, chi0, f * hessian)
        det = metric.det()
        rate = path.rate(float(t))
        jvals[k] = rate * integrate_top(phi * metric.trace_with(om) * det, grid)
        ivals[k] = rate * integrate_top(phi * det, grid)
    jval = _richardson(jvals)
    ival = _richardson(ivals)
    return {"J": jval, "I": ival, "Jhat": jval - grid.n * c * ival}


def aubin_yau_terms(grid: TorusGrid, chi0, phi: np.ndarray,
                    deriv: str = "fd4") -> list:
    """T_i = int W(P, chi0^i, chi_phi^{n-1-i}) dV for i = 0..n-1.

    Each integrand is a mixed discriminant with one rank-one positive
    semidefinite slot and positive definite remaining slots, hence
    pointwise nonnegative; every T_i is therefore nonnegative, which is
    what makes the energy inequality chain exact at grid level.
    """
    n = grid.n
    p = dbar_energy_matrix(phi, grid, deriv)
    chi = metric_field(grid, chi0, phi, deriv).chi
    chi0_m = as_matrix(chi0)
    if not np.iscomplexobj(chi):
        chi0_m = chi0_m.real
    terms = []
    for i in range(n):
        mats = [p] + [chi0_m] * i + [chi] * (n - 1 - i)
        dens = wedge_coefficient_batch(mats, n)
        terms.append(integrate_top(np.asarray(dens), grid))
    return terms


def eval_IE_JE(grid: TorusGrid, chi0, phi: np.ndarray,
               deriv: str = "fd4") -> tuple:
    """Aubin-Yau energies (I^E, J^E) in closed form (no path).

    I^E = (1/(n! V)) sum_i T_i and J^E reweights term i by (i+1)/(n+1),
    so (1/(n+1)) I^E <= J^E <= (n/(n+1)) I^E holds term by term.
    """
    n = grid.n
    terms = aubin_yau_terms(grid, chi0, phi, deriv)
    norm = math.factorial(n) * volume_of(chi0, grid)
    ie = sum(terms) / norm
    je = sum((i + 1) * t for i, t in enumerate(terms)) / ((n + 1) * norm)
    return ie, je


def ie_second_form(grid: TorusGrid, chi0, phi: np.ndarray,
                   deriv: str = "fd4") -> float:
    """I^E recomputed as (1/(n! V)) int phi (chi0^n - chi_phi^n).

    Equality with the sum-of-terms route is the discrete integration by
    parts identity; with spectral derivatives and band-limited data both
    routes are exact and agree to rounding.
    """
    metric = metric_field(grid, chi0, phi, deriv)
    det0 = float(np.linalg.det(as_matrix(chi0)).real)
    return integrate_top(phi * (det0 - metric.det()), grid) / volume_of(chi0, grid)


def eval_entropy(grid: TorusGrid, chi0, phi: np.ndarray,
                 deriv: str = "fd4") -> float:
    """int log(chi_phi^n / chi0^n) chi_phi^n/n! over the torus.

    Nonnegative by Jensen whenever the discrete total volume is conserved,
    which holds exactly for n = 2 with composed stencils.
    """
    metric = metric_field(grid, chi0, phi, deriv)
    det0 = float(np.linalg.det(as_matrix(chi0)).real)
    det = metric.det()
    if det0 <= 0.0 or np.any(det <= 0.0):
        raise ShapeError("volume forms must stay positive for the entropy")
    return integrate_top(np.log(det / det0) * det, grid)


def average_scalar_curvature(grid: TorusGrid, chi0, phi: np.ndarray,
                             deriv: str = "fd4") -> float:
    """Volume-weighted mean of R over the grid (0 in the continuum)."""
    metric = metric_field(grid, chi0, phi, deriv)
    r = scalar_curvature(metric, deriv)
    det = metric.det()
    return integrate_top(r * det, grid) / integrate_top(det, grid)


def eval_mabuchi(grid: TorusGrid, chi0, phi: np.ndarray,
                 path: PathSpec = PathSpec(), deriv: str = "fd4") -> float:
    """Mabuchi energy -int_0^1 int phidot_t (R_t - Rbar_t) chi_t^n/n! dt.

    Rbar_t is recomputed from the discrete field at every node rather than
    set to its continuum value zero, keeping the integrand consistent with
    the discretization.
    """
    hessian = complex_hessian_of(phi, grid, deriv)

    def kernel(t, metric):
        r = scalar_curvature(metric, deriv)
        det = metric.det()
        rbar = integrate_top(r * det, grid) / integrate_top(det, grid)
        return -path.rate(t) * integrate_top(phi * (r - rbar) * det, grid)

    return _richardson(_path_samples(grid, chi0, hessian, path, kernel))


def path_independence_gap(evaluator: Callable, *args, steps: int = 64,
                          **kwargs) -> tuple:
    """Evaluate a path functional on the linear and quadratic paths.

    Returns (linear value, quadratic value, relative gap); the gap is
    normalized by the larger magnitude, with an absolute floor so that a
    functional that vanishes identically reports gap 0.
    """
    lin = evaluator(*args, path=PathSpec("linear", steps), **kwargs)
    quad = evaluator(*args, path=PathSpec("quadratic", steps), **kwargs)
    scale = max(abs(lin), abs(quad), 1e-300)
    return lin, quad, abs(lin - quad) / scale


def fit_properness(je_values: np.ndarray, mab_values: np.ndarray) -> dict:
    """Fit the affine lower bound M >= alpha J^E - C from sampled pairs.

    alpha is the least-squares slope; C is then the smallest constant
    making the bound hold on every sample.  Purely descriptive: a fitted
    pair says nothing beyond the sampled data.
    """
    je = np.asarray(je_values, dtype=float)
    mab = np.asarray(mab_values, dtype=float)
    if je.shape != mab.shape or je.ndim != 1 or je.shape[0] < 2:
        raise ShapeError("need two equal-length 1-d sample arrays")
    slope, intercept = np.polyfit(je, mab, 1)
    c_min = float(np.max(slope * je - mab))
    slack = float(np.min(mab - (slope * je - c_min)))
    return {
        "alpha": float(slope),
        "intercept": float(intercept),
        "C": c_min,
        "min_slack": slack,
        "samples": int(je.shape[0]),
    }
