"""Damped Newton solution of the critical equation Lambda_chi omega = nc.

The linearization of the residual c - Lambda/n in the direction v is the
second-order operator

    Ltilde v = (1/n) h^{ab} d^2 v / dz_a dzbar_b,   h = chi^{-1} g chi^{-1},

which is negative semidefinite with a null space consisting of the stencil
dead modes (axis frequencies in {0, N/2}).  Each Newton step solves
(-Ltilde) delta = residual by preconditioned conjugate gradients restricted
to the orthogonal complement of the dead modes, then backtracks on the step
length until the sup residual strictly decreases and the metric stays
positive.  The additive gauge is fixed by removing the grid mean after
every accepted step.

With variable coefficients the pointwise form of Ltilde is not exactly
self-adjoint; the solver tolerates that with a stagnation guard in the
inner iteration and treats the returned vector as a quasi-Newton direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hermitian import SingularFormError, as_matrix
from .torus import (
    MetricField,
    TorusGrid,
    class_constant_c,
    complex_hessian_of,
    metric_field,
    null_mode_projection,
)


@dataclass(frozen=True)
class NewtonSettings:
    tol: float = 1e-9
    max_iters: int = 50
    damping: float = 1.0
    cg_rtol: float = 1e-10
    cg_maxiter: int = 5000
    damping_floor: float = 2.0**-20

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tolerance must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("initial damping must lie in (0, 1]")


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residuals: list = field(default_factory=list)
    damping_history: list = field(default_factory=list)
    cg_iterations: list = field(default_factory=list)
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residuals": self.residuals,
            "damping_history": self.damping_history,
            "cg_iterations": self.cg_iterations,
            "message": self.message,
        }


def linearized_apply(metric: MetricField, g, v: np.ndarray,
                     deriv: str = "fd4") -> np.ndarray:
    """Ltilde v = (1/n) h^{ab} (complex Hessian of v)_{ab}."""
    h = metric.h_matrix(g)
    hess = complex_hessian_of(v, metric.grid, deriv)
    out = np.einsum("...ab,...ba->...", h, hess) / metric.grid.n
    if np.iscomplexobj(out):
        return out.real.copy()
    return out


def _second_derivative_diagonal(grid: TorusGrid, deriv: str) -> float:
    """Diagonal entry of the one-axis composed second derivative.

    Used only to scale the Jacobi preconditioner; the composed 4th-order
    stencil has [D D]_{xx} = -(130/144)/dx^2, the Nyquist-zeroed spectral
    derivative has minus the mean of k^2 over the retained bins.
    """
    if deriv == "fd4":
        return -(130.0 / 144.0) / grid.dx**2
    k = np.fft.fftfreq(grid.points, d=1.0 / grid.points)
    if grid.points % 2 == 0:
        k[grid.points // 2] = 0.0
    return -float(np.mean(k**2))


def residual_field(grid: TorusGrid, omega, chi0, phi: np.ndarray, c: float,
                   deriv: str = "fd4") -> tuple:
    """(c - Lambda/n, metric) for the current potential."""
    metric = metric_field(grid, chi0, phi, deriv)
    lam = metric.trace_with(omega)
    return c - lam / grid.n, metric


def _pcg(apply_a, b: np.ndarray, diag: np.ndarray, grid: TorusGrid,
         rtol: float, maxiter: int) -> tuple:
    """Preconditioned CG on the dead-mode complement with stagnation guard."""
    b = null_mode_projection(b, grid)
    x = np.zeros_like(b)
    r = b.copy()
    norm_b = float(np.sqrt(np.vdot(r, r).real))
    if norm_b == 0.0:
        return x, 0
    z = null_mode_projection(r / diag, grid)
    p = z.copy()
    rz = float(np.vdot(r, z).real)
    best_x, best_norm = x, norm_b
    stall = 0
    for it in range(1, maxiter + 1):
        ap = null_mode_projection(apply_a(p), grid)
        pap = float(np.vdot(p, ap).real)
        if pap <= 0.0:
            # loss of positivity in the projected operator: stop with the
            # best iterate; the outer backtracking absorbs the inexactness
            break
        alpha = rz / pap
        x = x + alpha * p
        r = r - alpha * ap
        norm_r = float(np.sqrt(np.vdot(r, r).real))
        if norm_r < best_norm:
            best_x, best_norm = x, norm_r
            stall = 0
        else:
            stall += 1
            if stall >= 20:
                break
        if norm_r <= rtol * norm_b:
            return x, it
        z = null_mode_projection(r / diag, grid)
        rz_new = float(np.vdot(r, z).real)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    return best_x, maxiter


def newton_solve(grid: TorusGrid, omega, chi0, phi_init: np.ndarray,
                 settings: NewtonSettings = NewtonSettings(),
                 deriv: str = "fd4") -> tuple:
    """Solve Lambda_{chi_phi} omega = nc; returns (phi, NewtonReport).

    phi_init must be admissible; the result is mean-zero.  Failure modes:
    admissibility cannot be kept at the damping floor, or max_iters is
    exhausted (typical when the class pair violates the cone condition).
    """
    om = as_matrix(omega)
    ch = as_matrix(chi0)
    c = class_constant_c(om, ch)
    phi = np.array(phi_init, dtype=float)
    phi -= phi.mean()
    report = NewtonReport(converged=False, iterations=0)

    res, metric = residual_field(grid, om, ch, phi, c, deriv)
    sup_res = float(np.max(np.abs(res)))
    report.residuals.append(sup_res)

    dd_diag = _second_derivative_diagonal(grid, deriv)
    for it in range(1, settings.max_iters + 1):
        if sup_res < settings.tol:
            report.converged = True
            report.message = "residual below tolerance"
            break
        h = metric.h_matrix(om)
        h_trace = np.einsum("...aa->...", h)
        if np.iscomplexobj(h_trace):
            h_trace = h_trace.real
        # diag of (-Ltilde): -(1/(4n)) sum_a h_aa [DD]_xx, positive
        diag = -(0.25 / grid.n) * h_trace * dd_diag

        def apply_a(v):
            hess = complex_hessian_of(v, grid, deriv)
            out = np.einsum("...ab,...ba->...", h, hess) / grid.n
            if np.iscomplexobj(out):
                out = out.real
            return -out

        delta, cg_iters = _pcg(apply_a, res, diag, grid,
                               settings.cg_rtol, settings.cg_maxiter)
        report.cg_iterations.append(cg_iters)

        s = settings.damping
        accepted = False
        while s >= settings.damping_floor:
            trial = phi + s * delta
            trial -= trial.mean()
            try:
                trial_res, trial_metric = residual_field(
                    grid, om, ch, trial, c, deriv)
            except SingularFormError:
                s *= 0.5
                continue
            trial_sup = float(np.max(np.abs(trial_res)))
            if trial_sup < sup_res:
                phi, res, metric, sup_res = trial, trial_res, trial_metric, trial_sup
                accepted = True
                break
            s *= 0.5
        report.iterations = it
        report.damping_history.append(s if accepted else 0.0)
        report.residuals.append(sup_res)
        if not accepted:
            report.message = (
                "no admissible decreasing step above the damping floor"
            )
            return phi, report
    else:
        report.converged = sup_res < settings.tol
        report.message = ("residual below tolerance" if report.converged
                          else "iteration budget exhausted")
    return phi, report
