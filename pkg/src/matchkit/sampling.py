"""Point-cloud generators: i.i.d. clouds with bounded densities and
iterated-function-system Markov chains with additive noise.

Every sampler owns a private generator derived from a 64-bit seed, so
regenerating with the same descriptor and seed is bit-for-bit identical
and distinct trials can run concurrently without shared state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid, SpectralField, basis_field, make_geometry, wrap_unit

_REJECTION_BATCH = 8192


@dataclass(frozen=True)
class DensityModel:
    """Closed-form probability density with certified bounds 0 < lower <= rho <= upper."""

    label: str
    field: SpectralField
    lower: float
    upper: float

    def __post_init__(self):
        if not (0.0 < self.lower <= self.upper):
            raise ValueError("density bounds must satisfy 0 < lower <= upper")
        if abs(self.field.mean - 1.0) > 1e-6:
            raise ValueError("density does not integrate to 1 under grid quadrature")
        geo = self.field.geometry
        vals = self.field.to_grid(geo.min_grid())
        tol = 1e-9 * max(1.0, self.upper)
        if vals.min() < self.lower - tol or vals.max() > self.upper + tol:
            raise ValueError(
                f"density violates declared bounds: range [{vals.min():.6g}, {vals.max():.6g}] "
                f"vs [{self.lower}, {self.upper}]"
            )

    @property
    def geometry(self):
        return self.field.geometry

    def evaluate(self, points) -> np.ndarray:
        return self.field.eval_at(points)

    def grid_values(self, grid_n: int) -> np.ndarray:
        return self.field.to_grid(grid_n)


def uniform_density(geometry) -> DensityModel:
    c = np.zeros(geometry.n_coeffs)
    c[0] = 1.0
    return DensityModel("uniform", SpectralField(geometry, c), 1.0, 1.0)


def sine_density(geometry, amplitude: float = 0.5) -> DensityModel:
    """rho(x) = 1 + amplitude*sin(2 pi x1) on the torus."""
    if geometry.name != "torus":
        raise ValueError("sine density is torus-only; use cosine_density on the square")
    f = basis_field(geometry, 1, 0, "sin") * (amplitude / math.sqrt(2.0))
    return DensityModel(
        f"sine{amplitude:g}", f.shifted_mean(1.0), 1.0 - amplitude, 1.0 + amplitude
    )


def cosine_density(geometry, amplitude: float = 0.5) -> DensityModel:
    """rho(x) = 1 + amplitude*cos(pi x1), the Neumann-compatible single mode."""
    if geometry.name != "square":
        raise ValueError("cosine density is square-only")
    f = basis_field(geometry, 1, 0) * (amplitude / math.sqrt(2.0))
    return DensityModel(
        f"cos{amplitude:g}", f.shifted_mean(1.0), 1.0 - amplitude, 1.0 + amplitude
    )


def bump_density(geometry, amplitude: float = 0.4) -> DensityModel:
    """Separable bump (1 + a cos(2 pi x1))(1 + a cos(2 pi x2)), mean exactly 1."""
    if geometry.name != "torus":
        raise ValueError("bump density is torus-only")
    a = amplitude
    c = np.zeros(geometry.n_coeffs)
    c[0] = 1.0
    c[geometry.slot(1, 0, "cos")] = a / math.sqrt(2.0)
    c[geometry.slot(0, 1, "cos")] = a / math.sqrt(2.0)
    c[geometry.slot(1, 1, "cos")] = a * a / 2.0
    c[geometry.slot(1, -1, "cos")] = a * a / 2.0
    return DensityModel(
        f"bump{a:g}", SpectralField(geometry, c), (1.0 - a) ** 2, (1.0 + a) ** 2
    )


def density_by_label(label: str, geometry) -> DensityModel:
    table = {
        "uniform": uniform_density,
        "sine": sine_density,
        "bump": bump_density,
        "cosine": cosine_density,
    }
    if label not in table:
        raise ValueError(f"unknown density {label!r}; choose from {sorted(table)}")
    return table[label](geometry)


@dataclass(frozen=True)
class PointCloud:
    """Ordered samples plus the descriptor that reproduces them."""

    points: np.ndarray = field(repr=False)
    generator: dict
    seed: int
    burn_in: int = 0

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2:
            raise ValueError("points must be an (n, 2) array")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.shape[0]

    def save_csv(self, path):
        np.savetxt(path, self.points, delimiter=",", header="x1,x2", comments="")
        sidecar = {
            "generator": self.generator,
            "seed": int(self.seed),
            "n": len(self),
            "burn_in": int(self.burn_in),
        }
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def _rejection_draws(density: DensityModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """count draws from rho dm by rejection with the flat envelope upper * dm."""
    out = np.empty((count, 2))
    have = 0
    while have < count:
        props = rng.random((_REJECTION_BATCH, 2))
        u = rng.random(_REJECTION_BATCH)
        keep = props[u * density.upper <= density.evaluate(props)]
        take = min(count - have, keep.shape[0])
        out[have : have + take] = keep[:take]
        have += take
    return out


def sample_iid(density: DensityModel, n: int, seed: int) -> PointCloud:
    """n independent draws from rho dm; acceptance probability 1/upper per proposal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = _rejection_draws(density, n, _rng(seed))
    return PointCloud(pts, {"kind": "iid", "density": density.label}, seed)


# -- iterated function systems ------------------------------------------------

_CONTRACTIONS = {}


def _register(name):
    def deco(fn):
        _CONTRACTIONS[name] = fn
        return fn

    return deco


@_register("sine")
def _sine_contraction(params):
    cx, cy = params.get("center", (0.5, 0.5))
    L = params["L"]

    def F(x):
        return wrap_unit(
            np.stack(
                [
                    cx + (L / (2 * math.pi)) * np.sin(2 * math.pi * x[..., 0]),
                    cy + (L / (2 * math.pi)) * np.sin(2 * math.pi * x[..., 1]),
                ],
                axis=-1,
            )
        )

    return F


@_register("tri")
def _tri_contraction(params):
    """Triangle-wave contraction: range L/2 per axis, the strongest range an
    L-Lipschitz null-homotopic torus map can have."""
    cx, cy = params.get("center", (0.5, 0.5))
    L = params["L"]

    def tri(u):
        return 2.0 * np.abs(wrap_unit(u) - 0.5) - 0.5

    def F(x):
        return wrap_unit(
            np.stack(
                [cx + (L / 2.0) * tri(x[..., 0]), cy + (L / 2.0) * tri(x[..., 1])],
                axis=-1,
            )
        )

    return F


@_register("constant")
def _constant_map(params):
    c = np.asarray(params["value"], dtype=float)

    def F(x):
        return np.broadcast_to(c, np.shape(x)).copy()

    return F


@dataclass(frozen=True)
class IfsModel:
    """Markov chain X_{k+1} = F(X_k) + theta_k mod 1 with contraction F.

    The declared Lipschitz constant is spot-checked on 1000 random pairs
    at construction; the additive noise has a bounded density, so the
    transition kernel is k(x, .) = h(. - F(x)) and the chain is
    geometrically ergodic.
    """

    kind: str
    params: dict
    noise: DensityModel
    lipschitz: float

    def __post_init__(self):
        if not (0.0 < self.lipschitz < 1.0):
            raise ValueError("declared Lipschitz constant must lie in (0, 1)")
        if self.kind not in _CONTRACTIONS:
            raise ValueError(f"unknown contraction kind {self.kind!r}")
        F = self.contraction()
        rng = _rng(12345)
        x, y = rng.random((1000, 2)), rng.random((1000, 2))
        geo = self.noise.geometry
        ratio = geo.distance(F(x), F(y)) / np.maximum(geo.distance(x, y), 1e-300)
        if np.max(ratio) > self.lipschitz * (1.0 + 1e-9):
            raise ValueError(
                f"contraction violates declared L={self.lipschitz}: observed {np.max(ratio):.6g}"
            )

    def contraction(self):
        return _CONTRACTIONS[self.kind](self.params)

    def descriptor(self) -> dict:
        return {
            "kind": "ifs",
            "map": self.kind,
            "params": self.params,
            "noise": self.noise.label,
            "L": self.lipschitz,
        }


def default_ifs(geometry, L: float = 0.5, noise_label: str = "sine",
                kind: str = "tri") -> IfsModel:
    """The stock eta=1 sampler: a contraction with a tilted noise density."""
    noise = density_by_label(noise_label, geometry)
    return IfsModel(kind, {"center": (0.5, 0.5), "L": L}, noise, L)


def sample_ifs(model: IfsModel, n: int, seed: int, burn_in: int = 1000) -> PointCloud:
    """Iterate the chain from a uniform start, discarding burn_in states."""
    if n < 1 or burn_in < 0:
        raise ValueError("need n >= 1 and burn_in >= 0")
    rng = _rng(seed)
    total = n + burn_in
    noise = _rejection_draws(model.noise, total, rng)
    F = model.contraction()
    x = rng.random(2)
    out = np.empty((total, 2))
    for k in range(total):
        x = wrap_unit(F(x) + noise[k])
        out[k] = x
    return PointCloud(out[burn_in:], model.descriptor(), seed, burn_in=burn_in)


def invariant_density(model: IfsModel, cutoff: int, grid_n: int = 256,
                      iters: int = 200, tol: float = 1e-12) -> DensityModel:
    """Invariant density of the chain by transfer-operator power iteration.

    One application maps rho to (law of F(X)) convolved with the noise
    density: the push-forward is deposited on the grid by bilinear
    splatting of cell masses, the convolution runs through the FFT.
    Convergence is geometric, so iters defaults far beyond need; the
    kernel bounds pin min(h) <= rho <= max(h).
    """
    geo = model.noise.geometry
    if geo.name != "torus":
        raise ValueError("IFS chains are defined on the torus")
    F = model.contraction()
    grid = geo.grid(grid_n)
    nodes = grid.nodes()
    images = F(nodes)
    h_hat = np.fft.fft2(model.noise.grid_values(grid_n)) / grid_n**2

    # bilinear splat weights of each image point onto the periodic lattice
    scaled = images * grid_n
    i0 = np.floor(scaled).astype(int)
    frac = scaled - i0
    rho = np.ones((grid_n, grid_n))
    prev = rho
    for _ in range(iters):
        mass = (rho.ravel() / grid_n**2)
        push = np.zeros((grid_n, grid_n))
        for dx in (0, 1):
            for dy in (0, 1):
                w = (frac[:, 0] if dx else 1 - frac[:, 0]) * (
                    frac[:, 1] if dy else 1 - frac[:, 1]
                )
                np.add.at(
                    push,
                    (np.mod(i0[:, 0] + dx, grid_n), np.mod(i0[:, 1] + dy, grid_n)),
                    mass * w,
                )
        # density of push-forward, then convolve with the noise density
        push *= grid_n**2
        rho = np.real(np.fft.ifft2(np.fft.fft2(push) * h_hat))
        rho = np.maximum(rho, 0.0)
        rho /= rho.mean()
        delta = np.mean(np.abs(rho - prev))
        prev = rho
        if delta < tol:
            break
    f = SpectralField(geo, geo.from_grid(rho)).shifted_mean(1.0)
    vals = f.to_grid(geo.min_grid())
    lower = min(model.noise.lower, float(vals.min())) * (1.0 - 1e-9)
    upper = max(model.noise.upper, float(vals.max())) * (1.0 + 1e-9)
    return DensityModel(f"ifs-invariant-{model.kind}", f, lower, upper)


def estimate_beta(model: IfsModel, lag: int, trials: int, grid_n: int,
                  seed: int = 0, burn_in: int = 1000):
    """Histogram total-variation estimate of the beta-mixing coefficient at a lag.

    Bins (X_k, X_{k+lag}) on a grid_n^2 x grid_n^2 product binning and
    returns (tv, se): the TV distance between the joint histogram and the
    product of marginals, with a block standard error.  A biased lower
    bound; diagnostic only.
    """
    if lag < 0:
        raise ValueError("lag must be >= 0")
    bins = grid_n**2
    if trials < 5 * bins**2:
        raise ValueError(
            f"insufficient trials for a {bins}x{bins} binning: need >= {5 * bins**2}"
        )
    cloud = sample_ifs(model, trials + lag, seed, burn_in=burn_in)
    cells = np.minimum((cloud.points * grid_n).astype(int), grid_n - 1)
    flat = cells[:, 0] * grid_n + cells[:, 1]
    a, b = flat[: trials], flat[lag : lag + trials]

    def tv_of(a_part, b_part):
        joint = np.zeros((bins, bins))
        np.add.at(joint, (a_part, b_part), 1.0)
        joint /= a_part.size
        pa = joint.sum(axis=1)
        pb = joint.sum(axis=0)
        return 0.5 * np.sum(np.abs(joint - np.outer(pa, pb)))

    tv = tv_of(a, b)
    nblocks = 8
    edges = np.linspace(0, trials, nblocks + 1, dtype=int)
    block_tv = [tv_of(a[lo:hi], b[lo:hi]) for lo, hi in zip(edges[:-1], edges[1:])]
    se = float(np.std(block_tv, ddof=1) / math.sqrt(nblocks))
    return float(tv), se


def make_sampler(spec: dict, geometry):
    """Resolve a sampler descriptor into (draw(n, seed) -> PointCloud, density).

    Descriptors: {"kind": "iid", "density": label} or
    {"kind": "ifs", "L": float, "noise": label, "burn_in": int}.
    For IFS the returned density is the numerically computed invariant one.
    """
    kind = spec.get("kind", "iid")
    if kind == "iid":
        density = density_by_label(spec.get("density", "uniform"), geometry)
        return (lambda n, seed: sample_iid(density, n, seed)), density, math.inf
    if kind == "ifs":
        model = default_ifs(geometry, L=spec.get("L", 0.5), noise_label=spec.get("noise", "sine"))
        burn = int(spec.get("burn_in", 1000))
        density = invariant_density(model, geometry.cutoff)
        return (lambda n, seed: sample_ifs(model, n, seed, burn_in=burn)), density, 1.0
    raise ValueError(f"unknown sampler kind {kind!r}")
