"""Frequency-band averaging of one realization and the matching ensemble oracles.

The band average of ``kappa^p |u(x, kappa)|^2`` over ``[1, Q]`` converges, for
a single realization, to the strength profile ``T(x)``, a constant multiple of
the Riesz-type potential ``int phi(y) |x - y|^(-l) dy``. Exact discrete second
moments of the synthesized field (``covariance_moment``, ``cross_moments``)
give a deterministic reference at finite ``Q``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import greens
from .forward import acoustic_field, check_points, elastic_field, source_nodes
from .greens import ElasticParams
from .randfield import FieldSample, FieldSpec, SmoothBump, sample_field, whiten

MODELS = ("acoustic2", "acoustic3", "elastic2", "elastic3")


class SweepError(ValueError):
    """Invalid frequency sweep."""


class StatisticsError(ValueError):
    """Too few Monte-Carlo samples."""


def model_dimension(model: str) -> int:
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return int(model[-1])


def is_elastic(model: str) -> bool:
    model_dimension(model)
    return model.startswith("elastic")


def weight_exponent(model: str, m: float) -> float:
    """``m + 1`` in 2D, ``m`` in 3D."""
    return m + 1 if model_dimension(model) == 2 else m


def riesz_exponent(model: str) -> int:
    return 1 if model_dimension(model) == 2 else 2


@dataclass(frozen=True)
class FrequencySweep:
    upper: float
    step: float
    weight_exponent: float
    lower: float = 1.0

    def __post_init__(self):
        if not self.upper > self.lower:
            raise SweepError("sweep needs Q > 1")
        if not 0 < self.step <= 0.25:
            raise SweepError("frequency step must lie in (0, 0.25]")

    @classmethod
    def for_model(cls, model, m, upper, step=0.2):
        return cls(upper, step, weight_exponent(model, m))

    @property
    def frequencies(self):
        count = int(round((self.upper - self.lower) / self.step)) + 1
        return np.linspace(self.lower, self.upper, max(count, 2))

    def average(self, values, axis=0):
        """``(1/(Q-1)) * trapezoid(kappa^p values)`` along ``axis``."""
        k = self.frequencies
        shape = [1] * np.ndim(values)
        shape[axis] = -1
        w = (k**self.weight_exponent).reshape(shape)
        return np.trapezoid(w * values, k, axis=axis) / (self.upper - self.lower)


@dataclass
class StrengthProfile:
    points: np.ndarray
    values: np.ndarray
    source: str
    uncertainty: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# single-realization band average
# ---------------------------------------------------------------------------

def squared_field(sample: FieldSample, frequencies, points, model, params: ElasticParams | None = None):
    """``|u(x, kappa)|^2`` on a (frequency, point) table."""
    d = model_dimension(model)
    if sample.spec.dimension != d:
        raise ValueError("sample dimension does not match the model")
    if is_elastic(model):
        if params is None:
            raise ValueError("elastic models need ElasticParams")
        u = elastic_field(sample, params, np.atleast_2d(points), omegas=np.asarray(frequencies))
        return np.sum(np.abs(u) ** 2, axis=-1)
    u = acoustic_field(sample, np.asarray(frequencies), np.atleast_2d(points))
    return np.abs(u) ** 2


def band_average(sample: FieldSample, sweep: FrequencySweep, x, model, params=None):
    """Band-averaged strength estimate from one realization.

    Returns a float for a single point, an array for ``(P, d)`` points.
    """
    sq = squared_field(sample, sweep.frequencies, x, model, params)
    est = sweep.average(sq, axis=0)
    return float(est[0]) if np.ndim(x) == 1 else est


def band_profile(sample, sweep, points, model, params=None):
    sq = squared_field(sample, sweep.frequencies, points, model, params)
    return StrengthProfile(np.atleast_2d(points), sweep.average(sq, axis=0), "band_average",
                           meta={"integrand": sq})


# ---------------------------------------------------------------------------
# analytic targets
# ---------------------------------------------------------------------------

def _gauss_legendre(n, a, b):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


def bump_quadrature(bump: SmoothBump, nr=96, nang=192):
    """Nodes and weights integrating smooth functions against ``bump`` over its ball."""
    d = bump.dimension
    rho, wr = _gauss_legendre(nr, 0.0, bump.radius)
    prof = bump.profile(rho)
    c = np.asarray(bump.center)
    if d == 2:
        th = 2 * math.pi * np.arange(nang) / nang
        pts = c + np.stack([rho[:, None] * np.cos(th), rho[:, None] * np.sin(th)], axis=-1)
        w = (wr * prof * rho)[:, None] * np.full(nang, 2 * math.pi / nang)
        return pts.reshape(-1, 2), w.ravel()
    mu, wmu = _gauss_legendre(nang // 2, -1.0, 1.0)
    az = 2 * math.pi * np.arange(nang) / nang
    sin = np.sqrt(1 - mu**2)
    dirs = np.stack([sin[:, None] * np.cos(az), sin[:, None] * np.sin(az),
                     np.broadcast_to(mu[:, None], (len(mu), nang))], axis=-1)
    pts = c + rho[:, None, None, None] * dirs[None]
    w = (wr * prof * rho**2)[:, None, None] * wmu[None, :, None] * (2 * math.pi / nang)
    w = np.broadcast_to(w, pts.shape[:-1])
    return pts.reshape(-1, 3), w.ravel()


def riesz_potential(bumps, x, l, nr=96, nang=192):
    """``int phi(y) |x - y|^(-l) dy`` by tensor Gauss quadrature over each bump ball."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    total = np.zeros(len(pts))
    for b in bumps:
        nodes, w = bump_quadrature(b, nr, nang)
        r = np.sqrt(((pts[:, None, :] - nodes[None]) ** 2).sum(-1))
        total += (r ** (-l)) @ w
    return float(total[0]) if np.ndim(x) == 1 else total


def paper_constants(m: float, params: ElasticParams | None = None, c1=1.0, c2=1.0):
    """Leading-order constants of the strength formulas as published."""
    cm = (2.0 / (c1 + c2)) ** m
    out = {"c_m": cm, "C_2": -cm / 64.0, "C_3": cm / 8.0}
    if params is not None:
        cs, cp = params.c_s, params.c_p
        out["a_1"] = cs ** (3 - m) / (32 * math.pi)
        out["a_2"] = (cs * cp) ** 1.5 / (32 * math.pi) * (2 / (cs + cp)) ** m
        out["a_3"] = (cs ** (3 - m) + cp ** (3 - m)) / (32 * math.pi)
        out["b_1"] = cs ** (4 - m) / (128 * math.pi**2)
        out["b_2"] = (cs * cp) ** 2 / (128 * math.pi**2) * (2 / (cs + cp)) ** m
        out["b_3"] = (cs ** (4 - m) + cp ** (4 - m)) / (128 * math.pi**2)
    return out


def strength_constant(model, m, params: ElasticParams | None = None):
    """Published proportionality constant between ``T`` and the Riesz potential."""
    model_dimension(model)
    k = paper_constants(m, params)
    if model == "acoustic2":
        return k["C_2"] / (8 * math.pi)
    if model == "acoustic3":
        return k["C_3"] / (16 * math.pi**2)
    if params is None:
        raise ValueError("elastic constants need ElasticParams")
    if model == "elastic2":
        return k["a_3"]
    return k["b_3"] - k["b_1"]


def analytic_strength(bumps, x, model, m, constants_mode="paper", params=None, empirical_constant=None):
    """Leading-order strength ``T(x) = C int phi(y) |x - y|^(-l) dy``.

    ``constants_mode="paper"`` uses the published constant; ``"empirical"``
    uses ``empirical_constant`` (see :func:`fit_constant`).
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    from .randfield import support_distance
    if np.any(support_distance(bumps, pts) <= 0):
        from .forward import GeometryError
        raise GeometryError("observation point inside the source support")
    if constants_mode == "paper":
        c = strength_constant(model, m, params)
    elif constants_mode == "empirical":
        if empirical_constant is None:
            raise ValueError("empirical mode needs a fitted constant")
        c = empirical_constant
    else:
        raise ValueError(f"unknown constants_mode {constants_mode!r}")
    return c * riesz_potential(bumps, x, riesz_exponent(model))


# ---------------------------------------------------------------------------
# ensemble oracles
# ---------------------------------------------------------------------------

def _kernel_rows(spec, point, freq, model, params):
    """Kernel weights on the full grid: list over field components of arrays (grid shape)."""
    nodes, mask = source_nodes(spec)
    d = spec.dimension
    diff = point - nodes
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    rows = []
    if is_elastic(model):
        g = greens._navier(d, diff, r, params.at(freq))
        for i in range(d):
            comp = []
            for l in range(d):
                full = np.zeros(spec.grid.shape, dtype=complex)
                full[mask] = g[:, i, l]
                comp.append(full)
            rows.append(comp)
    else:
        full = np.zeros(spec.grid.shape, dtype=complex)
        full[mask] = greens.phi_radial(d, r, freq)
        rows.append([full])
    return rows


def _whitened(spec, point, freq, model, params):
    """Whitened vectors ``a[i][l]``: ``u_i = -sum_l a[i][l] . xi_l``."""
    rows = _kernel_rows(spec, point, freq, model, params)
    stacked = np.array(rows)  # (i, l, *grid)
    return whiten(spec, stacked)


def _check_model(spec, model, params):
    if spec.dimension != model_dimension(model):
        raise ValueError("spec dimension does not match the model")
    if is_elastic(model) and params is None:
        raise ValueError("elastic models need ElasticParams")


def covariance_moment(spec: FieldSpec, freq, x, model, params: ElasticParams | None = None):
    """Exact ``E|u(x, freq)|^2`` of the discrete synthesized field.

    ``freq`` (wavenumber or angular frequency) and ``x`` may be arrays; array
    input gives a ``(F, P)`` table.
    """
    _check_model(spec, model, params)
    freqs = np.atleast_1d(np.asarray(freq, dtype=float))
    pts = check_points(spec, x)
    axes = tuple(range(2, 2 + spec.dimension))
    out = np.empty((len(freqs), len(pts)))
    for p, point in enumerate(pts):
        for k, f in enumerate(freqs):
            a = _whitened(spec, point, f, model, params)
            out[k, p] = float(np.sum(np.abs(a) ** 2))
    if np.ndim(x) == 1:
        out = out[:, 0]
    if np.ndim(freq) == 0:
        out = out[0]
    return out


def cross_moments(spec: FieldSpec, freq1, freq2, x, model, params=None):
    """Exact ``(E u1 . conj(u2), E u1 . u2)`` at one point for two frequencies."""
    _check_model(spec, model, params)
    point = check_points(spec, x)[0]
    a1 = _whitened(spec, point, freq1, model, params)
    a2 = _whitened(spec, point, freq2, model, params)
    return complex(np.sum(a1 * np.conj(a2))), complex(np.sum(a1 * a2))


def oracle_band_average(spec, sweep: FrequencySweep, x, model, params=None):
    """Sweep average of ``kappa^p E|u|^2``: the deterministic finite-Q reference."""
    mom = covariance_moment(spec, sweep.frequencies, np.atleast_2d(x), model, params)
    avg = sweep.average(mom, axis=0)
    return float(avg[0]) if np.ndim(x) == 1 else avg


def band_average_std(spec, sweep: FrequencySweep, x, model, params=None):
    """Exact standard deviation of the single-realization band average at ``x``.

    Uses the Gaussian identity ``Cov(|u1|^2, |u2|^2) = |E u1 u2*|^2 + |E u1 u2|^2``,
    summed over component pairs for elastic fields.
    """
    _check_model(spec, model, params)
    point = check_points(spec, x)[0]
    k = sweep.frequencies
    wts = np.full(len(k), k[1] - k[0])
    wts[0] = wts[-1] = 0.5 * (k[1] - k[0])
    wts = wts * k**sweep.weight_exponent / (sweep.upper - sweep.lower)
    vecs = np.array([_whitened(spec, point, f, model, params).astype(np.complex64) for f in k])
    vecs = vecs.reshape(len(k), vecs.shape[1], -1)  # (freq, component, l * grid)
    cov = np.zeros((len(k), len(k)))
    for i in range(vecs.shape[1]):
        for j in range(vecs.shape[1]):
            ai, aj = vecs[:, i], vecs[:, j]
            cov += np.abs(ai @ aj.conj().T) ** 2 + np.abs(ai @ aj.T) ** 2
    return math.sqrt(max(float(wts @ cov @ wts), 0.0))


def fit_constant(spec, model, points, freqs, params=None):
    """Least-squares constant ``C`` in ``freq^p E|u|^2 ~ C * riesz(x)``.

    Returns ``(C, plateau)`` with the per-point plateau means.
    """
    freqs = np.asarray(freqs, dtype=float)
    mom = covariance_moment(spec, freqs, np.atleast_2d(points), model, params)
    p = weight_exponent(model, spec.order)
    plateau = np.mean(freqs[:, None] ** p * mom, axis=0)
    riesz = riesz_potential(spec.bumps, np.atleast_2d(points), riesz_exponent(model))
    c = float(plateau @ riesz / (riesz @ riesz))
    return c, plateau


# ---------------------------------------------------------------------------
# Monte-Carlo diagnostics
# ---------------------------------------------------------------------------

@dataclass
class Decorrelation:
    conj: complex
    conj_se: float
    plain: complex
    plain_se: float
    power1: float
    power2: float
    n_seeds: int


def ensemble_fields(spec, freqs, x, seeds, model="acoustic2", params=None):
    """Field values ``(seed, freq)`` at one point over many realizations (scalar fields)."""
    _check_model(spec, model, params)
    point = check_points(spec, x)[0]
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    out = []
    for s in seeds:
        smp = sample_field(spec, s)
        if is_elastic(model):
            out.append(elastic_field(smp, params, point, omegas=freqs))
        else:
            out.append(acoustic_field(smp, freqs, point))
    return np.array(out)


def frequency_decorrelation(spec, x, kappa1, kappa2, n_seeds, model="acoustic2", params=None, seed0=0):
    """Monte-Carlo ``E u(k1) conj u(k2)`` and ``E u(k1) u(k2)`` with standard errors."""
    if n_seeds < 10:
        raise StatisticsError("need at least 10 seeds")
    if min(kappa1, kappa2) < 1:
        raise ValueError("frequencies must be >= 1")
    vals = ensemble_fields(spec, [kappa1, kappa2], x, range(seed0, seed0 + n_seeds), model, params)
    u1, u2 = vals[:, 0], vals[:, 1]
    if u1.ndim > 1:
        prod_c = np.sum(u1 * np.conj(u2), axis=-1)
        prod_p = np.sum(u1 * u2, axis=-1)
        p1, p2 = np.sum(np.abs(u1) ** 2, -1), np.sum(np.abs(u2) ** 2, -1)
    else:
        prod_c, prod_p = u1 * np.conj(u2), u1 * u2
        p1, p2 = np.abs(u1) ** 2, np.abs(u2) ** 2
    n = len(prod_c)

    def se(z):
        return float(np.sqrt((np.var(z.real, ddof=1) + np.var(z.imag, ddof=1)) / n))

    return Decorrelation(complex(prod_c.mean()), se(prod_c), complex(prod_p.mean()), se(prod_p),
                         float(p1.mean()), float(p2.mean()), n)


def fourth_moment_check(X, Y):
    """Compare ``E((X^2 - EX^2)(Y^2 - EY^2))`` with ``2 (E XY)^2`` for zero-mean samples.

    Returns ``(lhs, rhs, se)`` where ``se`` is the delta-method standard error
    of ``lhs - rhs``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = len(X)
    z = (X**2 - np.mean(X**2)) * (Y**2 - np.mean(Y**2))
    xy = X * Y
    lhs = float(z.mean())
    rhs = float(2 * xy.mean() ** 2)
    infl = z - 4 * xy.mean() * xy
    se = float(np.std(infl, ddof=1) / math.sqrt(n))
    return lhs, rhs, se


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def write_sweep_csv(path, sweep: FrequencySweep, sq):
    """Columns ``freq, point, abs_u_sq, weighted`` (weighted = freq^p |u|^2)."""
    k = sweep.frequencies
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq", "point", "abs_u_sq", "weighted"])
        for i, kk in enumerate(k):
            for p in range(sq.shape[1]):
                w.writerow([repr(float(kk)), p, repr(float(sq[i, p])),
                            repr(float(kk**sweep.weight_exponent * sq[i, p]))])


def write_profile_json(path, profile: StrengthProfile, extra=None):
    data = {
        "source": profile.source,
        "points": np.asarray(profile.points).tolist(),
        "values": np.asarray(profile.values).tolist(),
    }
    if profile.uncertainty is not None:
        data["uncertainty"] = np.asarray(profile.uncertainty).tolist()
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_profile_json(path) -> StrengthProfile:
    with open(path) as fh:
        data = json.load(fh)
    unc = data.get("uncertainty")
    return StrengthProfile(np.asarray(data["points"]), np.asarray(data["values"]), data["source"],
                           None if unc is None else np.asarray(unc),
                           meta={k: v for k, v in data.items() if k not in ("points", "values", "source", "uncertainty")})
