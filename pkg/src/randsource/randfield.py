"""Microlocally isotropic Gaussian random sources on a periodic grid.

A sample is ``f = sqrt(phi) * K w`` where ``w`` is grid white noise and ``K``
is the Fourier multiplier ``|xi|^(-m/2)`` (zero mode removed). The covariance
``sqrt(phi) K^2 sqrt(phi)`` has principal symbol ``phi(x) |xi|^(-m)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np


class SpecError(ValueError):
    """Inconsistent field specification."""


@dataclass(frozen=True)
class SmoothBump:
    """``amplitude * exp(1 - 1/(1 - |x-c|^2/radius^2))`` inside the ball, 0 outside."""

    center: tuple
    radius: float
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise SpecError("bump radius must be positive")
        if self.amplitude < 0:
            raise SpecError("bump amplitude must be nonnegative")

    @property
    def dimension(self) -> int:
        return len(self.center)

    def profile(self, rho):
        """Value as a function of the distance ``rho`` to the center."""
        s2 = (np.asarray(rho, dtype=float) / self.radius) ** 2
        out = np.zeros(s2.shape)
        inside = s2 < 1
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.sqrt(np.sum((x - np.asarray(self.center)) ** 2, axis=-1))
        return self.profile(rho)


def strength(bumps, x):
    """Sum of bumps evaluated at points ``x`` (trailing axis = coordinates)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for b in bumps:
        out = out + b(x)
    return out


def support_distance(bumps, x):
    """Signed distance from ``x`` to the union of bump balls (negative inside)."""
    x = np.asarray(x, dtype=float)
    dist = np.full(x.shape[:-1], np.inf)
    for b in bumps:
        rho = np.sqrt(np.sum((x - np.asarray(b.center)) ** 2, axis=-1))
        dist = np.minimum(dist, rho - b.radius)
    return dist


@dataclass(frozen=True)
class Grid:
    """Cubic grid of ``n`` cells per axis with spacing ``spacing``; nodes are cell centers."""

    lower: tuple
    n: int
    spacing: float

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        if self.n < 2 or not self.spacing > 0:
            raise SpecError("grid needs n >= 2 and positive spacing")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dimension

    @property
    def upper(self) -> tuple:
        return tuple(lo + self.n * self.spacing for lo in self.lower)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension

    def axes(self):
        return [lo + (np.arange(self.n) + 0.5) * self.spacing for lo in self.lower]

    def nodes(self):
        """Node coordinates, shape ``shape + (d,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def wavenumbers(self):
        """Angular wavenumber magnitudes ``|xi|`` on the full FFT grid."""
        k = 2 * math.pi * np.fft.fftfreq(self.n, d=self.spacing)
        mesh = np.meshgrid(*([k] * self.dimension), indexing="ij")
        return np.sqrt(sum(m * m for m in mesh))

    def to_dict(self):
        return {"lower": list(self.lower), "n": self.n, "spacing": self.spacing}


@dataclass(frozen=True)
class FieldSpec:
    """Random source description: order ``m``, strength bumps and synthesis grid."""

    dimension: int
    order: float
    bumps: tuple
    grid: Grid
    components: int = 1

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))
        d = self.dimension
        if d not in (2, 3):
            raise SpecError("dimension must be 2 or 3")
        if not d <= self.order < d + 0.5:
            raise SpecError(f"order m must satisfy {d} <= m < {d + 0.5}, got {self.order}")
        if self.components not in (1, d):
            raise SpecError("components must be 1 (acoustic) or d (elastic)")
        if not self.bumps:
            raise SpecError("at least one strength bump is required")
        if any(b.dimension != d for b in self.bumps) or self.grid.dimension != d:
            raise SpecError("bump/grid dimension mismatch")
        lo, hi = self.support_box()
        glo, ghi = np.asarray(self.grid.lower), np.asarray(self.grid.upper)
        if np.any(lo <= glo) or np.any(hi >= ghi):
            raise SpecError("grid box must strictly contain the support of phi")
        if np.any(ghi - glo < 2 * (hi - lo)):
            warnings.warn("grid box is smaller than twice the support diameter; "
                          "periodic wrap-around correlation may be visible", stacklevel=3)

    @classmethod
    def around(cls, bumps, order, n, padding=2.0, components=1):
        """Cubic grid centered on the support, side ``padding`` times its diameter."""
        bumps = tuple(bumps)
        d = bumps[0].dimension
        lo = np.min([np.asarray(b.center) - b.radius for b in bumps], axis=0)
        hi = np.max([np.asarray(b.center) + b.radius for b in bumps], axis=0)
        side = padding * float(np.max(hi - lo))
        mid = (lo + hi) / 2
        grid = Grid(tuple(mid - side / 2), n, side / n)
        return cls(d, order, bumps, grid, components)

    def support_box(self):
        lo = np.min([np.asarray(b.center) - b.radius for b in self.bumps], axis=0)
        hi = np.max([np.asarray(b.center) + b.radius for b in self.bumps], axis=0)
        return lo, hi

    def strength(self, x):
        return strength(self.bumps, x)

    def strength_on_grid(self):
        return _grid_strength(self)

    def support_mask(self):
        return self.strength_on_grid() > 0

    def with_components(self, components):
        return FieldSpec(self.dimension, self.order, self.bumps, self.grid, components)

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "order": self.order,
            "components": self.components,
            "bumps": [{"center": list(b.center), "radius": b.radius, "amplitude": b.amplitude}
                      for b in self.bumps],
            "grid": self.grid.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        bumps = tuple(SmoothBump(tuple(b["center"]), b["radius"], b["amplitude"]) for b in data["bumps"])
        g = data["grid"]
        return cls(data["dimension"], data["order"], bumps,
                   Grid(tuple(g["lower"]), g["n"], g["spacing"]), data["components"])


@lru_cache(maxsize=8)
def _grid_strength(spec):
    values = spec.strength(spec.grid.nodes())
    values.setflags(write=False)
    return values


@lru_cache(maxsize=8)
def _multiplier(grid: Grid, order: float):
    xi = grid.wavenumbers()
    mult = np.zeros_like(xi)
    nz = xi > 0
    mult[nz] = xi[nz] ** (-order / 2)
    mult.setflags(write=False)
    return mult


@lru_cache(maxsize=8)
def _covariance_row(grid: Grid, order: float):
    """``c[k] = Cov(g_j, g_{j+k})`` of the unweighted field ``g = K w``."""
    mult = _multiplier(grid, order)
    row = np.fft.ifftn(mult**2).real / grid.cell_volume
    row.setflags(write=False)
    return row


@dataclass(frozen=True)
class FieldSample:
    spec: FieldSpec
    seed: int
    values: np.ndarray = field(repr=False)

    @property
    def scalar(self) -> np.ndarray:
        if self.spec.components != 1:
            raise SpecError("sample has several components")
        return self.values[0]

    def scaled(self, factor) -> "FieldSample":
        return FieldSample(self.spec, self.seed, factor * self.values)


def white_noise(grid: Grid, seed: int, component: int = 0):
    """Grid white noise with variance ``1/h^d`` per node.

    A negative seed returns the negated noise of ``|seed|``.
    """
    rng = np.random.default_rng([abs(int(seed)), int(component)])
    w = rng.standard_normal(grid.shape) / math.sqrt(grid.cell_volume)
    return -w if seed < 0 else w


def unweighted_field(spec: FieldSpec, seed: int, component: int = 0):
    """The stationary field ``K w`` before multiplication by ``sqrt(phi)``."""
    w = white_noise(spec.grid, seed, component)
    mult = _multiplier(spec.grid, spec.order)
    return np.fft.ifftn(np.fft.fftn(w) * mult).real


def sample_field(spec: FieldSpec, seed: int) -> FieldSample:
    """Draw one realization; every component is independent. Deterministic in ``(spec, seed)``."""
    weight = np.sqrt(spec.strength_on_grid())
    values = np.stack([weight * unweighted_field(spec, seed, c) for c in range(spec.components)])
    return FieldSample(spec, int(seed), values)


def sample_vector_field(spec: FieldSpec, seed: int) -> FieldSample:
    """Elastic source: ``d`` independent components sharing ``phi`` and ``m``."""
    if spec.components != spec.dimension:
        raise SpecError("vector sample needs components == dimension")
    return sample_field(spec, seed)


def _node_index(grid, node):
    idx = np.asarray(node)
    if idx.dtype.kind in "iu":
        return idx
    idx = np.rint((np.asarray(node, dtype=float) - np.asarray(grid.lower)) / grid.spacing - 0.5)
    return idx.astype(int)


def discrete_covariance(spec: FieldSpec, y, z) -> float:
    """Exact covariance ``E f(y) f(z)`` of the synthesized field at grid nodes.

    ``y`` and ``z`` are integer index tuples or node coordinates.
    """
    iy = _node_index(spec.grid, y)
    iz = _node_index(spec.grid, z)
    phi_grid = spec.strength_on_grid()
    weight = math.sqrt(phi_grid[tuple(iy)] * phi_grid[tuple(iz)])
    if weight == 0:
        return 0.0
    row = _covariance_row(spec.grid, spec.order)
    offset = tuple(np.mod(iy - iz, spec.grid.n))
    return float(weight * row[offset])


def whiten(spec: FieldSpec, weights):
    """Map grid weights ``v`` to ``a`` with ``sum_j v_j f_j h^d = a . xi``, ``xi`` standard normal.

    ``weights`` may be complex and carry leading batch axes. Second moments of
    linear functionals of the field follow directly:
    ``E|v.f h^d|^2 = ||a||^2``.
    """
    grid = spec.grid
    axes = tuple(range(-grid.dimension, 0))
    v = np.sqrt(spec.strength_on_grid()) * weights
    mult = _multiplier(grid, spec.order)
    a = np.fft.ifftn(np.fft.fftn(v, axes=axes) * mult, axes=axes)
    return a * math.sqrt(grid.cell_volume)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def radial_power_spectrum(values, spacing, nbins=None):
    """Azimuthally averaged periodogram; returns (bin centers, mean power)."""
    values = np.asarray(values, dtype=float)
    d = values.ndim
    n = values.shape[0]
    power = np.abs(np.fft.fftn(values)) ** 2
    k = 2 * math.pi * np.fft.fftfreq(n, d=spacing)
    mesh = np.meshgrid(*([k] * d), indexing="ij")
    kmag = np.sqrt(sum(m * m for m in mesh)).ravel()
    nyquist = math.pi / spacing
    nbins = nbins or n // 2
    edges = np.linspace(0, nyquist, nbins + 1)
    which = np.digitize(kmag, edges) - 1
    ok = (which >= 0) & (which < nbins) & (kmag > 0)
    sums = np.bincount(which[ok], weights=power.ravel()[ok], minlength=nbins)
    counts = np.bincount(which[ok], minlength=nbins)
    centers = 0.5 * (edges[1:] + edges[:-1])
    mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return centers, mean


def spectral_slope(spec: FieldSpec, seeds, band=(0.1, 0.6), weighted=False):
    """Log-log slope of the seed-averaged radial spectrum.

    By default the unweighted field ``K w`` (that is ``f / sqrt(phi)`` on the
    support) is analysed; ``weighted=True`` uses the samples ``f`` themselves.
    ``band`` is the fitted range as fractions of the Nyquist wavenumber.
    """
    acc = None
    for s in seeds:
        f = sample_field(spec, s).values[0] if weighted else unweighted_field(spec, s)
        k, p = radial_power_spectrum(f, spec.grid.spacing)
        acc = p if acc is None else acc + p
    return fit_slope(k, acc, spec.grid.spacing, band)


def fit_slope(k, power, spacing, band=(0.1, 0.6)):
    nyq = math.pi / spacing
    sel = (k >= band[0] * nyq) & (k <= band[1] * nyq) & np.isfinite(power) & (power > 0)
    slope, _ = np.polyfit(np.log(k[sel]), np.log(power[sel]), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_sample(sample: FieldSample, stem) -> tuple:
    """Write ``<stem>.json`` (header) and ``<stem>.npy`` (values, float64 little endian)."""
    stem = Path(stem)
    header = {"format": "randsource-field/1", "seed": sample.seed, "shape": list(sample.values.shape),
              "dtype": "<f8", "spec": sample.spec.to_dict()}
    json_path = stem.with_suffix(".json")
    npy_path = stem.with_suffix(".npy")
    json_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    np.save(npy_path, np.ascontiguousarray(sample.values, dtype="<f8"))
    return json_path, npy_path


def load_sample(stem) -> FieldSample:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    values = np.load(stem.with_suffix(".npy"))
    return FieldSample(FieldSpec.from_dict(header["spec"]), header["seed"], values)
