"""Spectral solvers for the linearized transport equations.

Three problems, all posed on mean-zero band-limited fields:
  - Poisson            -lap g = r
  - divergence form    -div(rho grad h) = r      (preconditioned CG)
  - screened           u - lap u = r / rho
The divergence-form operator is the Galerkin projection of the continuous
one: spectral differentiation, grid multiplication by rho, adjoint
divergence; symmetric positive definite whenever rho > 0 on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import SpectralField
from .smoothing import SmoothedDensity


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    tolerance: float

    @property
    def converged(self) -> bool:
        return self.residual <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "iterations": int(self.iterations),
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
        }


class SolverFailure(RuntimeError):
    """Raised when an iterative solve does not reach its tolerance."""

    def __init__(self, message: str, report: SolveReport):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class PotentialField:
    """A mean-zero solution field plus provenance and its solve report.

    The screened equation determines an additive constant as well; it is
    carried in mean_component so the oscillating part stays in Hdot^1.
    """

    field: SpectralField
    rhs_id: str
    report: SolveReport
    mean_component: float = 0.0

    def __post_init__(self):
        if self.field.mean != 0.0:
            raise ValueError("potential fields must be exactly mean-zero")

    @property
    def geometry(self):
        return self.field.geometry

    def total_grid_values(self, grid_n: int) -> np.ndarray:
        return self.field.to_grid(grid_n) + self.mean_component


def _coeff_grid_values(rho) -> np.ndarray:
    """Accept a SmoothedDensity, SpectralField, or plain grid array for rho."""
    if isinstance(rho, SmoothedDensity):
        return np.asarray(rho.grid_values)
    if isinstance(rho, SpectralField):
        return rho.to_grid(rho.geometry.default_grid_n())
    return np.asarray(rho, dtype=float)


def solve_poisson(rhs: SpectralField, rhs_id: str = "poisson") -> PotentialField:
    """-lap g = rhs by eigenvalue division; exact up to floating point."""
    geo = rhs.geometry
    if abs(rhs.mean) > 1e-12 * max(1.0, np.max(np.abs(rhs.coeffs))):
        raise ValueError("Poisson problem needs a mean-zero right-hand side")
    c = np.zeros_like(rhs.coeffs)
    nz = geo.lam > 0.0
    c[nz] = rhs.coeffs[nz] / geo.lam[nz]
    return PotentialField(
        SpectralField(geo, c), rhs_id, SolveReport(0, 0.0, 0.0)
    )


class DivFormOperator:
    """h -> -div(rho grad h) restricted to the band-limited space."""

    def __init__(self, geometry, rho_grid: np.ndarray):
        self.geo = geometry
        self.rho = np.asarray(rho_grid, dtype=float)
        self.n = self.rho.shape[0]
        if self.rho.min() <= 0.0:
            raise ValueError(
                f"divergence-form coefficient is not coercive: min = {self.rho.min():.6g}"
            )
        geometry._check_grid(self.n)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        geo, n = self.geo, self.n
        if geo.name == "torus":
            out = np.zeros_like(coeffs)
            for axis in (0, 1):
                d = geo.deriv_coeffs(coeffs, axis)
                g = geo.to_grid(d, n)
                back = geo.from_grid(self.rho * g)
                out -= geo.deriv_coeffs(back, axis)  # deriv is skew: adjoint = -deriv
            return out
        out = np.zeros_like(coeffs)
        for axis in (0, 1):
            g = geo.deriv_grid(coeffs, axis, n)
            out += geo.deriv_adjoint(self.rho * g, axis)
        return out


def solve_divform(rho, rhs: SpectralField, tol: float = 1e-10,
                  max_iter: int = None, rhs_id: str = "divform") -> PotentialField:
    """Preconditioned CG for -div(rho grad h) = rhs with the inverse
    Laplacian as preconditioner; iteration count is governed by the
    coefficient contrast max(rho)/min(rho), not the resolution."""
    geo = rhs.geometry
    rho_grid = _coeff_grid_values(rho)
    scale = float(np.max(np.abs(rhs.coeffs)))
    if abs(rhs.mean) > 1e-12 * max(1.0, scale):
        raise ValueError("divergence-form problem needs a mean-zero right-hand side")
    op = DivFormOperator(geo, rho_grid)
    if max_iter is None:
        contrast = rho_grid.max() / rho_grid.min()
        max_iter = 10 * math.ceil(math.sqrt(contrast)) * max(geo.cutoff, 10)

    nz = geo.lam > 0.0
    inv_lam = np.zeros_like(geo.lam)
    inv_lam[nz] = 1.0 / geo.lam[nz]

    b = rhs.coeffs.copy()
    b[0] = 0.0
    rhs_norm = float(np.linalg.norm(b))
    if rhs_norm == 0.0:
        zero = PotentialField(
            SpectralField(geo, np.zeros_like(b)), rhs_id, SolveReport(0, 0.0, tol)
        )
        return zero

    x = np.zeros_like(b)
    r = b.copy()
    z = inv_lam * r
    p = z.copy()
    rz = float(r @ z)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        ap = op.apply(p)
        ap[0] = 0.0
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r)) / rhs_norm
        if res <= tol:
            break
        z = inv_lam * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.linalg.norm(r)) / rhs_norm
    report = SolveReport(iterations, res, tol)
    if res > tol:
        raise SolverFailure(
            f"divergence-form CG stalled at residual {res:.3e} after {iterations} iterations",
            report,
        )
    x[0] = 0.0
    return PotentialField(SpectralField(geo, x), rhs_id, report)


def solve_screened(rho, rhs: SpectralField, tol: float = 1e-10,
                   rhs_id: str = "screened") -> PotentialField:
    """(I - lap) u = rhs / rho: grid division, band-limit re-projection,
    then exact division by (1 + lam).  The constant part of u is dropped
    (potential fields are mean-zero; the screened equation determines the
    mean, which is reported separately by callers that need it)."""
    geo = rhs.geometry
    rho_grid, grid_n = _coeff_grid_values(rho)
    n = rho_grid.shape[0]
    if rho_grid.min() <= 0.0:
        raise ValueError("screened solve needs a positive coefficient on the grid")
    ratio = geo.from_grid(rhs.to_grid(n) / rho_grid)
    u = ratio / (1.0 + geo.lam)
    # residual of the projected equation, exact by construction modulo roundoff
    res = float(
        np.linalg.norm((1.0 + geo.lam) * u - ratio)
        / max(np.linalg.norm(ratio), 1e-300)
    )
    report = SolveReport(0, res, tol)
    if res > tol:
        raise SolverFailure("screened solve residual above tolerance", report)
    mean_part = float(u[0])
    u = u.copy()
    u[0] = 0.0
    pf = PotentialField(SpectralField(geo, u), rhs_id, report)
    object.__setattr__(pf, "mean_component", mean_part)
    return pf


def gradient(pf: PotentialField, grid_n: int) -> np.ndarray:
    """Spectral gradient on the grid, shape (n, n, 2); exact for band-limited fields."""
    geo = pf.geometry
    if geo.name == "torus":
        comps = [geo.to_grid(geo.deriv_coeffs(pf.field.coeffs, ax), grid_n) for ax in (0, 1)]
    else:
        comps = [geo.deriv_grid(pf.field.coeffs, ax, grid_n) for ax in (0, 1)]
    return np.stack(comps, axis=-1)


def gradient_at(pf: PotentialField, points: np.ndarray) -> np.ndarray:
    """Gradient at arbitrary points (used when targets are off-lattice)."""
    geo = pf.geometry
    if geo.name == "torus":
        comps = [
            geo.eval_at(geo.deriv_coeffs(pf.field.coeffs, ax), points) for ax in (0, 1)
        ]
        return np.stack(comps, axis=-1)
    raise NotImplementedError("off-lattice gradients are torus-only")


def hessian(pf: PotentialField, grid_n: int) -> np.ndarray:
    """Spectral Hessian on the grid, shape (n, n, 2, 2)."""
    geo = pf.geometry
    out = np.empty((grid_n, grid_n, 2, 2))
    if geo.name == "torus":
        for i in (0, 1):
            di = geo.deriv_coeffs(pf.field.coeffs, i)
            for j in (0, 1):
                out[..., i, j] = geo.to_grid(geo.deriv_coeffs(di, j), grid_n)
    else:
        for i in (0, 1):
            for j in (0, 1):
                out[..., i, j] = geo.second_deriv_grid(pf.field.coeffs, i, j, grid_n)
    return out


def grad_sup_norm(pf: PotentialField, grid_n: int) -> float:
    g = gradient(pf, grid_n)
    return float(np.max(np.sqrt(np.sum(g * g, axis=-1))))


def hess_sup_norm(pf: PotentialField, grid_n: int) -> float:
    h = hessian(pf, grid_n)
    return float(np.max(np.sqrt(np.sum(h * h, axis=(-2, -1)))))


def lq_gradient_norm(pf: PotentialField, q: float, grid_n: int = 256) -> float:
    """(integral |grad h|^q dm)^{2/q} by grid quadrature, q in [2, 4]."""
    if not (2.0 <= q <= 4.0):
        raise ValueError("q must lie in [2, 4]")
    g = gradient(pf, grid_n)
    mag = np.sqrt(np.sum(g * g, axis=-1))
    return float(np.mean(mag**q) ** (2.0 / q))


def regularization_error(h: PotentialField, h_delta: PotentialField,
                         rho_grid: np.ndarray, rho_delta_grid: np.ndarray,
                         lam_lower: float) -> tuple:
    """Energy inequality for the regularization step.

    Returns (lhs, rhs_bound): lhs = integral |grad(h_delta - h)|^2 and
    rhs_bound = lam^{-2} integral |rho - rho_delta|^2 |grad h|^2.  The weak
    formulation guarantees lhs <= rhs_bound with coercivity constant lam.
    """
    n = rho_grid.shape[0]
    gd = gradient(h_delta, n) - gradient(h, n)
    lhs = float(np.mean(np.sum(gd * gd, axis=-1)))
    gh = gradient(h, n)
    diff2 = (rho_grid - rho_delta_grid) ** 2
    rhs_bound = float(np.mean(diff2 * np.sum(gh * gh, axis=-1)) / lam_lower**2)
    return lhs, rhs_bound
