"""Recovery of the strength ``phi`` from a profile ``T(x) = C int phi(y) |x - y|^(-l) dy``.

The first-kind integral equation is discretized on a node grid and solved by
Tikhonov regularization, optionally with a nonnegativity constraint. Two
checks of the uniqueness argument are provided: iterated Laplacians of ``T``
against kernels of raised exponent, and the layered (spherical-mean) form of
the Riesz potential.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from .estimator import bump_quadrature, riesz_potential
from .forward import GeometryError
from .randfield import Grid, strength, support_distance


class ConditioningError(ValueError):
    """Unregularized solve of a rank-deficient system."""


@dataclass(frozen=True)
class KernelOperator:
    """``A[i, j] = C |x_i - y_j|^(-l) h^d``."""

    points: np.ndarray
    nodes: np.ndarray
    exponent: float
    constant: float
    cell_volume: float
    matrix: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, phi_values):
        return self.matrix @ np.ravel(phi_values)


def _nodes_of(grid_or_nodes, cell_volume):
    if isinstance(grid_or_nodes, Grid):
        g = grid_or_nodes
        return g.nodes().reshape(-1, g.dimension), g.cell_volume, g.spacing
    nodes = np.atleast_2d(np.asarray(grid_or_nodes, dtype=float))
    if cell_volume is None:
        raise ValueError("explicit nodes need a cell volume")
    return nodes, float(cell_volume), cell_volume ** (1.0 / nodes.shape[1])


def assemble_kernel(points, grid, l, C=1.0, cell_volume=None) -> KernelOperator:
    """Discretize the Riesz-type kernel between measurement points and grid nodes.

    ``grid`` is a :class:`Grid` or an ``(N, d)`` node array together with
    ``cell_volume``. Points inside any grid cell raise :class:`GeometryError`.
    """
    nodes, vol, h = _nodes_of(grid, cell_volume)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != nodes.shape[1]:
        raise ValueError("points and nodes differ in dimension")
    diff = pts[:, None, :] - nodes[None, :, :]
    if np.any(np.max(np.abs(diff), axis=-1) <= h / 2):
        raise GeometryError("measurement point inside the grid support")
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    matrix = C * r ** (-float(l)) * vol
    matrix.setflags(write=False)
    return KernelOperator(pts, nodes, float(l), float(C), vol, matrix)


@dataclass
class Reconstruction:
    phi: np.ndarray
    lam: float
    residual: float
    nonneg: bool
    truth_error: float | None = None
    stationarity: float | None = None

    @property
    def norm(self):
        return float(np.linalg.norm(self.phi))


def _stationarity(A, T, lam, x):
    g = A.T @ (A @ x - T) + lam**2 * x
    return float(np.linalg.norm(np.maximum(x - g, 0.0) - x))


def _projected_gradient(A, T, lam, x, tol, max_iter=20000):
    """Polish a nonnegative iterate until the projected-gradient map moves it by less than ``tol``."""
    step = 1.0 / (np.linalg.norm(A, 2) ** 2 + lam**2)
    for _ in range(max_iter):
        if _stationarity(A, T, lam, x) <= tol:
            break
        g = A.T @ (A @ x - T) + lam**2 * x
        x = np.maximum(x - step * g, 0.0)
    return x


def tikhonov_solve(op: KernelOperator, T, lam, nonneg=False, truth=None, tol=1e-8) -> Reconstruction:
    """Minimize ``||A phi - T||^2 + lam^2 ||phi||^2``.

    With ``nonneg`` the minimization is restricted to ``phi >= 0`` (bounded least
    squares on the stacked system, then projected-gradient polishing to stationarity
    ``tol * max(1, ||A^T T||)``).
    """
    A = op.matrix
    T = np.asarray(T, dtype=float).ravel()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if T.shape[0] != A.shape[0]:
        raise ValueError("data length does not match the operator")
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    if lam == 0:
        rank_ok = A.shape[0] >= A.shape[1] and s[-1] > s[0] * 1e-12
        if not rank_ok:
            raise ConditioningError("lambda = 0 needs a full-column-rank operator")
    stat = None
    if nonneg:
        n = A.shape[1]
        stacked = np.vstack([A, lam * np.eye(n)])
        rhs = np.concatenate([T, np.zeros(n)])
        x = lsq_linear(stacked, rhs, bounds=(0.0, np.inf), method="bvls", tol=1e-14, max_iter=50 * n).x
        x = np.maximum(x, 0.0)
        scale = max(1.0, float(np.linalg.norm(A.T @ T)))
        x = _projected_gradient(A, T, lam, x, tol * scale)
        stat = _stationarity(A, T, lam, x)
    else:
        filt = s / (s**2 + lam**2)
        x = vt.T @ (filt * (u.T @ T))
    resid = float(np.linalg.norm(A @ x - T))
    err = None
    if truth is not None:
        truth = np.ravel(truth)
        err = float(np.linalg.norm(x - truth) / np.linalg.norm(truth))
    return Reconstruction(x, float(lam), resid, bool(nonneg), err, stat)


@dataclass
class LambdaSweep:
    reconstructions: list
    corner: int
    best: int | None

    @property
    def lambdas(self):
        return np.array([r.lam for r in self.reconstructions])

    @property
    def residuals(self):
        return np.array([r.residual for r in self.reconstructions])

    @property
    def norms(self):
        return np.array([r.norm for r in self.reconstructions])


def lcurve_corner(residuals, norms):
    """Index of maximum curvature of the log-log L-curve (parametrized by position)."""
    rho = np.log(np.maximum(residuals, 1e-300))
    eta = np.log(np.maximum(norms, 1e-300))
    if len(rho) < 3:
        return 0
    d1r, d1e = np.gradient(rho), np.gradient(eta)
    d2r, d2e = np.gradient(d1r), np.gradient(d1e)
    kappa = (d1r * d2e - d2r * d1e) / np.maximum((d1r**2 + d1e**2) ** 1.5, 1e-300)
    return int(np.argmax(kappa))


def lambda_sweep(op, T, lambdas, nonneg=False, truth=None) -> LambdaSweep:
    """Solve over a lambda grid; reports the L-curve corner and, given a truth, the best error."""
    recs = [tikhonov_solve(op, T, lam, nonneg, truth) for lam in sorted(lambdas)]
    corner = lcurve_corner(np.array([r.residual for r in recs]), np.array([r.norm for r in recs]))
    best = None
    if truth is not None:
        best = int(np.argmin([r.truth_error for r in recs]))
    return LambdaSweep(recs, corner, best)


def write_reconstruction(stem, grid: Grid, rec: Reconstruction, extra=None):
    """``<stem>.csv`` (node coordinates, phi) and ``<stem>.json`` (lambda, residual, error)."""
    nodes = grid.nodes().reshape(-1, grid.dimension)
    names = ["x", "y", "z"][: grid.dimension]
    with open(f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["phi"])
        for node, v in zip(nodes, rec.phi):
            w.writerow([repr(float(c)) for c in node] + [repr(float(v))])
    meta = {"lambda": rec.lam, "residual": rec.residual, "nonneg": rec.nonneg,
            "truth_error": rec.truth_error, "stationarity": rec.stationarity,
            "grid": grid.to_dict()}
    if extra:
        meta.update(extra)
    with open(f"{stem}.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# fidelity checks of the uniqueness argument
# ---------------------------------------------------------------------------

def laplacian_factor(k, d):
    """``c`` in ``Delta |x|^(-k) = c |x|^(-k-2)`` away from the origin: ``k (k + 2 - d)``."""
    return k * (k + 2 - d)


def iterated_factor(l, n, d):
    return math.prod(laplacian_factor(l + 2 * i, d) for i in range(n))


def _discrete_laplacian_power(fn, x, h, n, d):
    """``(Delta_h)^n fn`` at ``x`` with the standard (2d+1)-point stencil."""
    offsets = {(0,) * d: 1.0}
    for _ in range(n):
        nxt = {}
        for off, c in offsets.items():
            nxt[off] = nxt.get(off, 0.0) - 2 * d * c / h**2
            for axis in range(d):
                for sgn in (-1, 1):
                    o = list(off)
                    o[axis] += sgn
                    o = tuple(o)
                    nxt[o] = nxt.get(o, 0.0) + c / h**2
        offsets = nxt
    keys = list(offsets)
    pts = np.asarray(x, dtype=float) + h * np.array(keys, dtype=float)
    vals = fn(pts)
    return float(np.dot([offsets[k] for k in keys], vals))


def laplacian_consistency(bumps, x, l, n, stencil=None, patch=3, spacing=0.05, nr=64, nang=128):
    """Max deviation between ``(Delta_h)^n T`` and ``c * T_{l+2n}`` near ``x``.

    ``T_k(x) = int phi(y) |x - y|^(-k) dy`` is evaluated with a fixed quadrature,
    so the discrete Laplacian acts on exactly the same finite sum. ``c`` is the
    product of ``k (k + 2 - d)`` over ``k = l, l + 2, ...``. The deviation is
    normalized by ``max(|c|, 1) * max |T_{l+2n}|`` over a ``patch^d`` grid of
    centers around ``x``.
    """
    x = np.asarray(x, dtype=float)
    d = len(x)
    if stencil is None:
        stencil = 1e-3 if n == 1 else 1e-2
    offs = (np.arange(patch) - (patch - 1) / 2) * spacing
    centers = np.stack(np.meshgrid(*([offs] * d), indexing="ij"), -1).reshape(-1, d) + x
    reach = n * stencil * math.sqrt(d)
    if np.any(support_distance(bumps, centers) <= reach):
        raise GeometryError("stencil reaches the source support")
    nodes, weights = [], []
    for b in bumps:
        q, w = bump_quadrature(b, nr, nang)
        nodes.append(q)
        weights.append(w)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)

    def potential(k):
        def fn(p):
            r = np.sqrt(((p[:, None, :] - nodes[None]) ** 2).sum(-1))
            return (r ** (-float(k))) @ weights
        return fn

    c = iterated_factor(l, n, d)
    lhs = np.array([_discrete_laplacian_power(potential(l), p, stencil, n, d) for p in centers])
    rhs = c * potential(l + 2 * n)(centers)
    scale = max(abs(c), 1.0) * np.max(np.abs(potential(l + 2 * n)(centers)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(lhs - rhs)) / scale)


def spherical_mean(bumps, x, r, nang=256):
    """``S(x, r) = int_{|y - x| = r} phi(y) ds`` (surface measure, not normalized).

    Trapezoid rule on the circle; Gauss-Legendre times trapezoid on the sphere.
    ``r`` may be an array.
    """
    x = np.asarray(x, dtype=float)
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    d = len(x)
    if d == 2:
        th = 2 * math.pi * np.arange(nang) / nang
        dirs = np.stack([np.cos(th), np.sin(th)], -1)
        w = np.full(nang, 2 * math.pi / nang)
        jac = r
    else:
        mu, wmu = np.polynomial.legendre.leggauss(nang // 2)
        az = 2 * math.pi * np.arange(nang) / nang
        s = np.sqrt(1 - mu**2)
        dirs = np.stack([s[:, None] * np.cos(az), s[:, None] * np.sin(az),
                         np.broadcast_to(mu[:, None], (len(mu), nang))], -1).reshape(-1, 3)
        w = (wmu[:, None] * np.full(nang, 2 * math.pi / nang)).ravel()
        jac = r**2
    pts = x + r[:, None, None] * dirs[None]
    out = strength(bumps, pts) @ w * jac
    return float(out[0]) if scalar else out


def layered_riesz(bumps, x, l, nr=200, nang=256):
    """``int r^(-l) S(x, r) dr`` over the distance range of the support."""
    x = np.asarray(x, dtype=float)
    near = max(float(np.min(support_distance(bumps, x[None]))), 0.0)
    far = max(float(np.linalg.norm(x - np.asarray(b.center))) + b.radius for b in bumps)
    t, w = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * (far - near) * t + 0.5 * (far + near)
    w = 0.5 * (far - near) * w
    return float(np.sum(w * r ** (-float(l)) * spherical_mean(bumps, x, r, nang)))


def discretized_bump(bumps, grid: Grid):
    """Strength values at the grid nodes, flattened."""
    return strength(bumps, grid.nodes()).ravel()


def riesz_data(bumps, points, l, C=1.0):
    """Noiseless profile ``C int phi |x - y|^(-l)`` by quadrature."""
    return C * riesz_potential(bumps, np.atleast_2d(points), l)
