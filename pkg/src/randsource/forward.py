"""Radiated fields of a sampled source by midpoint quadrature on the synthesis grid.

``u(x) = -sum_j K(x, y_j) f(y_j) h^d`` with ``K`` the Helmholtz fundamental
solution (acoustic) or the Navier Green tensor (elastic). Only nodes where the
strength is positive contribute; the sample vanishes elsewhere.
"""

from __future__ import annotations

import csv
import math
import warnings

import numpy as np

from . import greens
from .greens import ElasticParams
from .randfield import FieldSample, FieldSpec, support_distance
from .specialfn import hankel1_asym


class GeometryError(ValueError):
    """Observation point inside (or too close to) the source support."""


class ResolutionWarning(UserWarning):
    """Grid spacing coarser than one sixth of the shortest wavelength."""


_CHUNK = 2_000_000


def check_points(spec: FieldSpec, points, margin=0.0):
    """Validate observation points; returns an ``(P, d)`` array."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != spec.dimension:
        raise GeometryError(f"points must have {spec.dimension} coordinates")
    dist = support_distance(spec.bumps, pts)
    if np.any(dist <= margin):
        raise GeometryError("observation point inside the source support")
    return pts


def check_resolution(spec: FieldSpec, wavenumber_max):
    wavelength = 2 * math.pi / wavenumber_max
    if spec.grid.spacing > wavelength / 6:
        warnings.warn(f"grid spacing {spec.grid.spacing:.4g} exceeds wavelength/6 = {wavelength / 6:.4g}",
                      ResolutionWarning, stacklevel=3)


def source_nodes(spec: FieldSpec):
    """Coordinates and mask of the nodes where the strength is positive."""
    mask = spec.support_mask()
    return spec.grid.nodes()[mask], mask


def _scalar_kernel(d, r, kappa, truncated):
    if d == 2 and truncated:
        return 0.25j * hankel1_asym(0, 2, kappa * r)
    return greens.phi_radial(d, r, kappa)


def _kappa_chunks(kappas, nnodes):
    step = max(1, _CHUNK // max(nnodes, 1))
    for start in range(0, len(kappas), step):
        yield slice(start, start + step)


def _acoustic(sample, kappa, x, truncated):
    spec = sample.spec
    if spec.components != 1:
        raise ValueError("acoustic field needs a scalar sample")
    kappas = np.atleast_1d(np.asarray(kappa, dtype=float))
    if np.any(kappas <= 0):
        raise ValueError("wavenumber must be positive")
    pts = check_points(spec, x)
    check_resolution(spec, kappas.max())
    nodes, mask = source_nodes(spec)
    weights = sample.values[0][mask] * spec.grid.cell_volume
    out = np.empty((len(kappas), len(pts)), dtype=complex)
    for p, point in enumerate(pts):
        r = np.sqrt(np.sum((point - nodes) ** 2, axis=-1))
        for sl in _kappa_chunks(kappas, len(r)):
            kern = _scalar_kernel(spec.dimension, r[None, :], kappas[sl, None], truncated)
            out[sl, p] = -kern @ weights
    return _shape_result(out, kappa, x)


def _shape_result(out, freq, x):
    if np.ndim(x) == 1:
        out = out[..., 0]
    if np.ndim(freq) == 0:
        out = out[0]
    return out


def acoustic_field(sample: FieldSample, kappa, x):
    """Radiated acoustic field ``u(x, kappa)``.

    ``kappa`` may be a scalar or 1-D array and ``x`` a point or ``(P, d)`` array;
    array inputs produce a ``(K, P)`` result.
    """
    return _acoustic(sample, kappa, x, truncated=False)


def acoustic_field_trunc(sample: FieldSample, kappa, x, N=2):
    """High-frequency approximation with kernel ``-(i/4) H_{0,N}^(1)`` in 2D.

    In 3D the exact kernel is already elementary and is returned unchanged.
    """
    if sample.spec.dimension == 3:
        return _acoustic(sample, kappa, x, truncated=False)
    if N != 2:
        spec = sample.spec
        pts = check_points(spec, x)
        nodes, mask = source_nodes(spec)
        weights = sample.values[0][mask] * spec.grid.cell_volume
        kappas = np.atleast_1d(np.asarray(kappa, dtype=float))
        out = np.empty((len(kappas), len(pts)), dtype=complex)
        for p, point in enumerate(pts):
            r = np.sqrt(np.sum((point - nodes) ** 2, axis=-1))
            kern = 0.25j * hankel1_asym(0, N, kappas[:, None] * r[None, :])
            out[:, p] = -kern @ weights
        return _shape_result(out, kappa, x)
    return _acoustic(sample, kappa, x, truncated=True)


def _elastic(sample, params, x, truncated, omegas=None):
    spec = sample.spec
    d = spec.dimension
    if spec.components != d:
        raise ValueError("elastic field needs a d-component sample")
    if truncated and d != 2:
        raise NotImplementedError("truncated elastic field exists only in 2D")
    omega_arr = np.atleast_1d(np.asarray(params.omega if omegas is None else omegas, dtype=float))
    pts = check_points(spec, x)
    check_resolution(spec, omega_arr.max() * params.c_s)
    nodes, mask = source_nodes(spec)
    f = sample.values[:, mask].T * spec.grid.cell_volume  # (nodes, d)
    out = np.empty((len(omega_arr), len(pts), d), dtype=complex)
    for p, point in enumerate(pts):
        diff = point - nodes
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        for k, w in enumerate(omega_arr):
            prm = params.at(w)
            g = greens._navier_trunc(diff, r, prm) if truncated else greens._navier(d, diff, r, prm)
            out[k, p] = -np.einsum("jil,jl->i", g, f)
    res = out
    if np.ndim(x) == 1:
        res = res[:, 0]
    if omegas is None or np.ndim(omegas) == 0:
        res = res[0]
    return res


def elastic_field(sample: FieldSample, params: ElasticParams, x, omegas=None):
    """Radiated elastic displacement ``u(x, omega)`` (complex ``d``-vector).

    ``omegas`` optionally overrides ``params.omega`` with an array of frequencies,
    giving a result of shape ``(W, [P,] d)``.
    """
    return _elastic(sample, params, x, False, omegas)


def elastic_field_trunc(sample: FieldSample, params: ElasticParams, x, omegas=None):
    """2D high-frequency approximation built from ``H_{0,2}``, ``H_{1,3}``, ``H_{2,4}``."""
    return _elastic(sample, params, x, True, omegas)


def helmholtz_residual(field_fn, kappa, x, stencil_h, spec: FieldSpec | None = None):
    """Relative residual ``|Delta_h u + kappa^2 u| / (kappa^2 |u|)`` of a field callable.

    When ``spec`` is given, the stencil ball of radius ``2 stencil_h`` must stay
    clear of the source support.
    """
    x = np.asarray(x, dtype=float)
    if spec is not None and support_distance(spec.bumps, x) <= 2 * stencil_h:
        raise GeometryError("stencil touches the source support")
    u0 = field_fn(x)
    lap = 0.0
    for axis in range(len(x)):
        e = np.zeros(len(x))
        e[axis] = stencil_h
        lap = lap + (field_fn(x + e) + field_fn(x - e) - 2 * u0) / stencil_h**2
    return float(abs(lap + kappa**2 * u0) / (kappa**2 * abs(u0)))


def field_table(sample: FieldSample, frequencies, points, params: ElasticParams | None = None):
    """Batch evaluation: frequencies x points -> complex array ``(F, P, components)``."""
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if sample.spec.components == 1:
        return acoustic_field(sample, freqs, pts)[..., None]
    if params is None:
        raise ValueError("elastic sample needs ElasticParams")
    return elastic_field(sample, params, pts, omegas=freqs)


def write_field_csv(path, frequencies, values):
    """CSV with columns ``freq, point, re_0, im_0[, re_1, im_1, ...]``."""
    values = np.asarray(values)
    ncomp = values.shape[-1]
    header = ["freq", "point"]
    for c in range(ncomp):
        header += [f"re_{c}", f"im_{c}"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, freq in enumerate(np.atleast_1d(frequencies)):
            for p in range(values.shape[1]):
                row = [repr(float(freq)), p]
                for c in range(ncomp):
                    z = values[k, p, c]
                    row += [repr(float(z.real)), repr(float(z.imag))]
                w.writerow(row)
