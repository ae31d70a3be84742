"""Empirical measures, heat-semigroup regularization, and the schedule
t(n), delta(n) with the deviation functionals behind the high-probability
events."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import SpectralField
from .sampling import DensityModel, PointCloud


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform atomic measure on a point cloud."""

    cloud: PointCloud

    @property
    def n(self) -> int:
        return len(self.cloud)

    @property
    def weight(self) -> float:
        return 1.0 / self.n


def empirical_coeffs(measure, geometry) -> SpectralField:
    """Mode coefficients (1/n) sum_j phi_k(X_j) of an empirical measure."""
    cloud = measure.cloud if isinstance(measure, EmpiricalMeasure) else measure
    return SpectralField(geometry, geometry.point_coeffs(cloud.points))


@dataclass(frozen=True)
class SmoothedDensity:
    """P_t applied to a measure or density: coefficients damped by e^{-t lam}.

    grid_values are cached on the chosen grid; min_value is a truncation
    diagnostic (the exact P_t of a positive measure is positive, so a
    negative minimum can only come from the mode cutoff and is reported,
    never clipped).
    """

    field: SpectralField
    time: float
    grid_n: int
    grid_values: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.grid_values is None:
            object.__setattr__(self, "grid_values", self.field.to_grid(self.grid_n))
        gv = np.asarray(self.grid_values)
        gv.flags.writeable = False
        object.__setattr__(self, "grid_values", gv)

    @property
    def mass(self) -> float:
        return self.field.mean

    @property
    def min_value(self) -> float:
        return float(self.grid_values.min())

    @property
    def positive_on_grid(self) -> bool:
        return self.min_value > 0.0

    def eval_at(self, points):
        return self.field.eval_at(points)


def heat_smooth(obj, t: float, grid_n: int = 256) -> SmoothedDensity:
    """Apply P_t.  Accepts a SpectralField, DensityModel, EmpiricalMeasure,
    PointCloud or SmoothedDensity; t = 0 is the identity on coefficients."""
    if t < 0.0:
        raise ValueError("smoothing time must be >= 0")
    if isinstance(obj, SmoothedDensity):
        base, t_total = obj.field, t + obj.time
    elif isinstance(obj, DensityModel):
        base, t_total = obj.field, t
    elif isinstance(obj, SpectralField):
        base, t_total = obj, t
    elif isinstance(obj, (EmpiricalMeasure, PointCloud)):
        raise TypeError("use smooth_empirical(measure, geometry, t): a bare "
                        "point cloud does not carry a mode cutoff")
    else:
        raise TypeError(f"cannot smooth object of type {type(obj).__name__}")
    geo = base.geometry
    damped = SpectralField(geo, base.coeffs * geo.heat_multiplier(t))
    return SmoothedDensity(damped, t_total, grid_n)


def smooth_empirical(measure, geometry, t: float, grid_n: int = 256) -> SmoothedDensity:
    """mu^{n,t} = P_t mu^n in one step."""
    return heat_smooth(empirical_coeffs(measure, geometry), t, grid_n)


@dataclass(frozen=True)
class Schedule:
    """Regularization exponents: delta = log^{-kappa1}(n), t = log^{kappa2}(n)/n,
    event exponent upsilon, and the configured Schauder exponent kappa used
    only in the validity constraint upsilon > (kappa+2)*kappa1."""

    kappa1: float
    kappa2: float
    upsilon: float
    kappa: float

    def __post_init__(self):
        if min(self.kappa1, self.kappa2, self.upsilon) <= 0.0 or self.kappa <= 0.0:
            raise ValueError("all schedule exponents must be positive")
        if self.upsilon <= (self.kappa + 2.0) * self.kappa1:
            raise ValueError(
                f"invalid schedule: need upsilon > (kappa+2)*kappa1 = "
                f"{(self.kappa + 2.0) * self.kappa1:.4g}, got upsilon = {self.upsilon}"
            )

    def t(self, n: int) -> float:
        return schedule_t(n, self.kappa2)

    def delta(self, n: int) -> float:
        return schedule_delta(n, self.kappa1)

    def event_threshold(self, n: int) -> float:
        return math.log(n) ** (-self.upsilon)

    def conclusion_threshold(self, n: int) -> float:
        return math.log(n) ** (-(self.upsilon - (self.kappa + 2.0) * self.kappa1))


# Calibrated desk-scale defaults; see README and the per-experiment notes.
DEFAULT_SCHEDULE = Schedule(kappa1=0.1, kappa2=0.5, upsilon=0.3, kappa=0.5)


def schedule_t(n: int, kappa2: float) -> float:
    """t = log^{kappa2}(n) / n."""
    if n < 3:
        raise ValueError("schedule requires n >= 3 (log n > 1)")
    return math.log(n) ** kappa2 / n


def schedule_delta(n: int, kappa1: float) -> float:
    """delta = log^{-kappa1}(n)."""
    if n < 3:
        raise ValueError("schedule requires n >= 3 (log n > 1)")
    return math.log(n) ** (-kappa1)


def sup_deviation(a: SmoothedDensity, b: SmoothedDensity) -> float:
    """Grid sup-norm of a - b; the membership statistic of the event A_n."""
    if a.grid_n != b.grid_n or a.field.cutoff != b.field.cutoff:
        raise ValueError("sup_deviation requires matching grid and cutoff")
    return float(np.max(np.abs(a.grid_values - b.grid_values)))


def rho_smoothing_error(density: DensityModel, s: float, q: float,
                        grid_n: int = 256) -> float:
    """|| P_s rho - rho ||_{L^q} by grid quadrature."""
    if s <= 0.0:
        raise ValueError("smoothing time must be > 0")
    geo = density.geometry
    diff = SpectralField(geo, density.field.coeffs * (geo.heat_multiplier(s) - 1.0))
    vals = np.abs(diff.to_grid(grid_n))
    return float(np.mean(vals**q) ** (1.0 / q))


def l1_density_shift(density: DensityModel, s1: float, s2: float,
                     grid_n: int = 256) -> float:
    """|| rho_{s1} - rho_{s2} ||_{L^1}, the contractivity correction term."""
    geo = density.geometry
    mult = geo.heat_multiplier(s1) - geo.heat_multiplier(s2)
    diff = SpectralField(geo, density.field.coeffs * mult)
    return float(np.mean(np.abs(diff.to_grid(grid_n))))
