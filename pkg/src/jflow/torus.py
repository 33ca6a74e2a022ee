"""Periodic grids, derivatives, and metric fields on flat tori.

A flat torus of complex dimension n is modelled as [0, 2pi)^{2n} with the
standard complex structure z_a = x_a + i y_a.  Two grid layouts are
supported.  The "invariant" layout samples only the x coordinates on an
n-dimensional grid and represents potentials constant along the y
directions; this is the workhorse layout, since every structure constant of
the problem survives the restriction.  The "full" layout samples all 2n real
coordinates.

Derivatives are fourth-order centred differences by default.  The complex
Hessian is built by composing two first-derivative passes rather than by a
dedicated second-derivative stencil: composition gives exact discrete
integration by parts against the grid sum, which the conservation-law tests
rely on.  The price is a 2^naxes-dimensional null space (modes whose axis
frequencies all lie in {0, N/2}); null_mode_projection removes it where it
matters.  A spectral derivative mode with the Nyquist bin zeroed shares the
same null space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hermitian import (
    HermitianForm,
    ShapeError,
    SingularFormError,
    as_matrix,
    trace_pair,
)

TWO_PI = 2.0 * np.pi

DERIV_MODES = ("fd4", "spectral")
GRID_MODES = ("invariant", "full")


@dataclass(frozen=True)
class TorusGrid:
    """Equispaced periodic grid on the torus [0, 2pi)^{2n}.

    n is the complex dimension, points the sample count per axis.  Samples
    sit at cell centres (i + 1/2) * dx, so midpoint quadrature applies.  In
    invariant mode the grid has n axes and each sample carries the volume of
    its cell times the (2pi)^n volume of the suppressed y torus.
    """

    n: int
    points: int
    mode: str = "invariant"

    def __post_init__(self):
        if self.n < 1:
            raise ShapeError("complex dimension must be at least 1")
        if self.points < 8:
            raise ShapeError("need at least 8 points per axis for the stencils")
        if self.mode not in GRID_MODES:
            raise ShapeError(f"grid mode must be one of {GRID_MODES}")

    @property
    def naxes(self) -> int:
        return self.n if self.mode == "invariant" else 2 * self.n

    @property
    def dx(self) -> float:
        return TWO_PI / self.points

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.naxes

    @property
    def npoints(self) -> int:
        return self.points**self.naxes

    @property
    def cell_volume(self) -> float:
        suppressed = TWO_PI ** self.n if self.mode == "invariant" else 1.0
        return self.dx**self.naxes * suppressed

    @property
    def volume(self) -> float:
        return TWO_PI ** (2 * self.n)

    def axis_coordinate(self, axis: int) -> np.ndarray:
        """Coordinate along one axis, shaped to broadcast over the grid."""
        if not 0 <= axis < self.naxes:
            raise ShapeError(f"axis {axis} out of range for {self.naxes} axes")
        x = (np.arange(self.points) + 0.5) * self.dx
        shape = [1] * self.naxes
        shape[axis] = self.points
        return x.reshape(shape)

    def meshgrid(self) -> list:
        return [self.axis_coordinate(j) for j in range(self.naxes)]

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def describe(self) -> dict:
        return {"n": self.n, "points": self.points, "mode": self.mode}


def cosine_mode(grid: TorusGrid, kvec: Sequence[int], amplitude: float = 1.0,
                phase: float = 0.0) -> np.ndarray:
    """amplitude * cos(k . x + phase) sampled on the grid."""
    kvec = list(kvec)
    if len(kvec) != grid.naxes:
        raise ShapeError(
            f"wavevector has {len(kvec)} entries, grid has {grid.naxes} axes"
        )
    arg = np.zeros(grid.shape)
    for j, k in enumerate(kvec):
        if k:
            arg = arg + k * grid.axis_coordinate(j)
    return amplitude * np.cos(arg + phase)


def _fd4(values: np.ndarray, axis: int, dx: float) -> np.ndarray:
    up1 = np.roll(values, -1, axis=axis)
    dn1 = np.roll(values, 1, axis=axis)
    up2 = np.roll(values, -2, axis=axis)
    dn2 = np.roll(values, 2, axis=axis)
    return (8.0 * (up1 - dn1) - (up2 - dn2)) / (12.0 * dx)


def _spectral_derivative(values: np.ndarray, axis: int, points: int) -> np.ndarray:
    # period 2pi, so wavenumbers are integers; the Nyquist bin is zeroed to
    # keep derivatives of real fields real
    k = np.fft.fftfreq(points, d=1.0 / points)
    if points % 2 == 0:
        k[points // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = points
    mult = (1j * k).reshape(shape)
    out = np.fft.ifft(np.fft.fft(values, axis=axis) * mult, axis=axis)
    if not np.iscomplexobj(values):
        return out.real.copy()
    return out


def first_derivative(values: np.ndarray, grid: TorusGrid, axis: int,
                     deriv: str = "fd4") -> np.ndarray:
    if values.shape != grid.shape:
        raise ShapeError(f"field shape {values.shape} != grid shape {grid.shape}")
    if not 0 <= axis < grid.naxes:
        raise ShapeError(f"axis {axis} out of range for {grid.naxes} axes")
    if deriv == "fd4":
        return _fd4(values, axis, grid.dx)
    if deriv == "spectral":
        return _spectral_derivative(values, axis, grid.points)
    raise ShapeError(f"derivative mode must be one of {DERIV_MODES}")


def gradient(values: np.ndarray, grid: TorusGrid, deriv: str = "fd4") -> list:
    return [first_derivative(values, grid, j, deriv) for j in range(grid.naxes)]


def complex_hessian_of(values: np.ndarray, grid: TorusGrid,
                       deriv: str = "fd4") -> np.ndarray:
    """Discrete coefficient matrix of the (1,1)-form i ddbar(phi).

    Entry (a, b) approximates d^2 phi / dz_a dzbar_b.  In invariant mode the
    result is real symmetric; in full mode it is Hermitian, with conjugate
    symmetry holding exactly because the lower triangle is assigned by
    conjugation.  Composed first-derivative passes commute across axes, so
    the symmetric part needs no averaging.
    """
    n = grid.n
    du = gradient(values, grid, deriv)
    cache: dict = {}

    def second(j: int, k: int) -> np.ndarray:
        key = (j, k) if j <= k else (k, j)
        if key not in cache:
            cache[key] = first_derivative(du[key[0]], grid, key[1], deriv)
        return cache[key]

    if grid.mode == "invariant":
        hess = np.empty(grid.shape + (n, n))
        for a in range(n):
            for b in range(a, n):
                block = 0.25 * second(a, b)
                hess[..., a, b] = block
                if b > a:
                    hess[..., b, a] = block
        return hess

    hess = np.empty(grid.shape + (n, n), dtype=np.complex128)
    for a in range(n):
        for b in range(a, n):
            real = second(a, b) + second(n + a, n + b)
            imag = second(a, n + b) - second(n + a, b)
            block = 0.25 * (real + 1j * imag)
            hess[..., a, b] = block
            if b > a:
                hess[..., b, a] = np.conj(block)
            else:
                hess[..., a, a] = 0.25 * real
    return hess


def null_mode_projection(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Remove the modes invisible to composed first-derivative stencils.

    These are the 2^naxes Fourier bins whose frequency along every axis lies
    in {0, N/2} (the mean among them).  Both derivative modes annihilate
    exactly this set.
    """
    vhat = np.fft.fftn(values)
    dead = [0, grid.points // 2] if grid.points % 2 == 0 else [0]
    grids = np.ix_(*([np.array(dead)] * grid.naxes))
    vhat[grids] = 0.0
    out = np.fft.ifftn(vhat)
    if not np.iscomplexobj(values):
        return out.real.copy()
    return out


def integrate_top(values: np.ndarray, grid: TorusGrid) -> float:
    """Integral over the full 2n-torus of a sampled scalar density."""
    if values.shape != grid.shape:
        raise ShapeError(f"field shape {values.shape} != grid shape {grid.shape}")
    total = values.sum() * grid.cell_volume
    if np.iscomplexobj(values):
        return complex(total)
    return float(total)


def field_mean(values: np.ndarray, grid: TorusGrid) -> float:
    return integrate_top(values, grid) / grid.volume


@dataclass(frozen=True)
class PotentialField:
    """A real potential sampled on a torus grid."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ShapeError(
                f"values shape {self.values.shape} != grid {self.grid.shape}"
            )

    def mean(self) -> float:
        return field_mean(self.values, self.grid)

    def zero_mean(self) -> "PotentialField":
        return PotentialField(self.grid, self.values - self.values.mean())


def save_field(path, field: PotentialField, meta: dict | None = None) -> None:
    """Write a potential with its grid metadata to a .npz archive."""
    header = dict(field.grid.describe())
    if meta:
        header.update(meta)
    np.savez(path, values=field.values, header=json.dumps(header, sort_keys=True))


def load_field(path) -> tuple:
    """Read a potential saved by save_field; returns (field, header dict)."""
    with np.load(path, allow_pickle=False) as archive:
        values = np.asarray(archive["values"])
        header = json.loads(str(archive["header"]))
    grid = TorusGrid(n=int(header["n"]), points=int(header["points"]),
                     mode=str(header["mode"]))
    extra = {k: v for k, v in header.items() if k not in ("n", "points", "mode")}
    return PotentialField(grid, values), extra


class MetricField:
    """chi = chi0 + i ddbar(phi) sampled on a grid, with its Cholesky stack.

    Construction fails with SingularFormError as soon as chi stops being
    positive definite somewhere, which is the blow-up signal the flow driver
    listens for.
    """

    __slots__ = ("grid", "chi0", "hessian", "chi", "chol", "_det")

    def __init__(self, grid: TorusGrid, chi0, hessian: np.ndarray):
        self.grid = grid
        self.chi0 = as_matrix(chi0)
        n = grid.n
        if self.chi0.shape != (n, n):
            raise ShapeError(
                f"background form is {self.chi0.shape}, expected {(n, n)}"
            )
        if hessian.shape != grid.shape + (n, n):
            raise ShapeError("hessian stack does not match the grid")
        self.hessian = hessian
        chi0_cast = self.chi0
        if not np.iscomplexobj(hessian) and np.allclose(chi0_cast.imag, 0.0):
            chi0_cast = chi0_cast.real
        self.chi = chi0_cast + hessian
        try:
            self.chol = np.linalg.cholesky(self.chi)
        except np.linalg.LinAlgError as exc:
            raise SingularFormError(
                "metric lost positivity on the grid"
            ) from exc
        self._det = None

    @property
    def n(self) -> int:
        return self.grid.n

    def det(self) -> np.ndarray:
        if self._det is None:
            diag = self.chol[..., range(self.n), range(self.n)]
            if np.iscomplexobj(diag):
                diag = diag.real
            self._det = np.prod(diag, axis=-1) ** 2
        return self._det

    def trace_with(self, g) -> np.ndarray:
        """Pointwise chi^{ij} g_{ij} for a constant positive form g."""
        gm = as_matrix(g)
        cfac = np.linalg.cholesky(gm)
        if not np.iscomplexobj(self.chol) and np.allclose(gm.imag, 0.0):
            cfac = cfac.real
        sol = np.linalg.solve(self.chol, np.broadcast_to(cfac, self.chol.shape))
        return (np.abs(sol) ** 2).sum(axis=(-2, -1))

    def inverse(self) -> np.ndarray:
        eye = np.eye(self.n, dtype=self.chol.dtype)
        low_inv = np.linalg.solve(self.chol, np.broadcast_to(eye, self.chol.shape))
        return low_inv.conj().swapaxes(-1, -2) @ low_inv

    def h_matrix(self, g) -> np.ndarray:
        """Pointwise chi^{-1} g chi^{-1}, the kernel of the linearized trace."""
        gm = as_matrix(g)
        inv = self.inverse()
        if not np.iscomplexobj(inv) and np.allclose(gm.imag, 0.0):
            gm = gm.real
        return inv @ gm @ inv

    def relative_eigenvalues(self, g) -> np.ndarray:
        """Eigenvalues of chi against g at every grid point, ascending."""
        from .hermitian import pencil_eigenvalues_batch

        gm = as_matrix(g)
        flat = self.chi.reshape(-1, self.n, self.n)
        lam = pencil_eigenvalues_batch(gm, flat)
        return lam.reshape(self.grid.shape + (self.n,))


def metric_field(grid: TorusGrid, chi0, phi: np.ndarray,
                 deriv: str = "fd4") -> MetricField:
    return MetricField(grid, chi0, complex_hessian_of(phi, grid, deriv))


def laplacian_w(omega, phi: np.ndarray, grid: TorusGrid,
                deriv: str = "fd4") -> np.ndarray:
    """Weighted Laplacian omega^{ab} d^2 phi / dz_a dzbar_b on the grid."""
    om = as_matrix(omega)
    inv = np.linalg.inv(om)
    hess = complex_hessian_of(phi, grid, deriv)
    val = np.einsum("ab,...ba->...", inv, hess)
    if np.iscomplexobj(val):
        return val.real.copy()
    return val


def class_constant_c(omega, chi0) -> float:
    """The constant c with n c = chi0^{ij} omega_{ij} for constant forms.

    On flat tori with translation-invariant background forms the defining
    integral ratio collapses to a single trace, because both integrands are
    constant.
    """
    n = as_matrix(omega).shape[0]
    return trace_pair(chi0, omega) / n


def scalar_curvature(metric: MetricField, deriv: str = "fd4") -> np.ndarray:
    """R = -chi^{ab} d^2(log det chi)/dz_a dzbar_b on the grid."""
    logdet = np.log(metric.det())
    hess = complex_hessian_of(logdet, metric.grid, deriv)
    inv = metric.inverse()
    val = np.einsum("...ab,...ba->...", inv, hess)
    if np.iscomplexobj(val):
        return val.real.copy() * -1.0
    return -val
