"""Helmholtz fundamental solutions and Navier Green tensors in two and three dimensions.

All functions accept a single observation point ``x`` and one or many source
points ``y`` (trailing axis of length ``d``); the leading axes of ``y`` are
carried through to the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specialfn import hankel1, hankel1_asym


class SingularityError(ValueError):
    """Kernel evaluated at coincident points."""


@dataclass(frozen=True)
class AcousticParams:
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("wavenumber must be positive")


@dataclass(frozen=True)
class ElasticParams:
    """Angular frequency and Lame constants of a homogeneous isotropic medium."""

    omega: float
    lam: float
    mu: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.lam + self.mu > 0:
            raise ValueError("lambda + mu must be positive")

    @property
    def c_p(self) -> float:
        return (self.lam + 2 * self.mu) ** -0.5

    @property
    def c_s(self) -> float:
        return self.mu**-0.5

    @property
    def kappa_p(self) -> float:
        return self.c_p * self.omega

    @property
    def kappa_s(self) -> float:
        return self.c_s * self.omega

    def at(self, omega: float) -> "ElasticParams":
        return ElasticParams(omega, self.lam, self.mu)


def _differences(d, x, y):
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (d,) or y.shape[-1] != d:
        raise ValueError(f"points must have {d} coordinates")
    diff = x - y
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(r == 0):
        raise SingularityError("x and y coincide")
    return diff, r


def phi_radial(d, r, kappa):
    """Fundamental solution as a function of distance ``r > 0``."""
    if d == 2:
        return 0.25j * hankel1(0, kappa * r)
    return np.exp(1j * kappa * r) / (4 * math.pi * r)


def phi(d, x, y, kappa):
    """Outgoing fundamental solution of ``Delta u + kappa^2 u = 0``.

    ``(i/4) H_0^(1)(kappa |x-y|)`` in 2D and ``exp(i kappa |x-y|) / (4 pi |x-y|)``
    in 3D.
    """
    _, r = _differences(d, x, y)
    out = phi_radial(d, r, kappa)
    return complex(out) if np.ndim(out) == 0 else out


def _hess_parts(d, r, kappa):
    """Coefficients (a, b) with ``d2 Phi / dx_i dx_j = a delta_ij + b e_i e_j``, e = (x-y)/r."""
    t = kappa * r
    if d == 2:
        a = -0.25j * kappa * hankel1(1, t) / r
        b = 0.25j * kappa**2 * hankel1(2, t)
        return a, b
    e = np.exp(1j * t)
    common = e * (1j * t - 1) / (4 * math.pi * r**3)
    a = common
    b = -3 * common - kappa**2 * e / (4 * math.pi * r)
    return a, b


def _assemble(diff, r, a, b):
    e = diff / r[..., None]
    d = diff.shape[-1]
    eye = np.eye(d)
    a = np.asarray(a)[..., None, None]
    b = np.asarray(b)[..., None, None]
    return a * eye + b * (e[..., :, None] * e[..., None, :])


def hess_phi(d, x, y, kappa):
    """Hessian of the fundamental solution with respect to ``x``."""
    diff, r = _differences(d, x, y)
    a, b = _hess_parts(d, r, kappa)
    return _assemble(diff, r, a, b)


def hess_phi_diff(d, x, y, params: ElasticParams):
    """``grad_x grad_x^T [Phi(x, y, kappa_s) - Phi(x, y, kappa_p)]`` in closed form."""
    diff, r = _differences(d, x, y)
    return _hess_diff(d, diff, r, params)


def _hess_diff(d, diff, r, params):
    a_s, b_s = _hess_parts(d, r, params.kappa_s)
    a_p, b_p = _hess_parts(d, r, params.kappa_p)
    return _assemble(diff, r, a_s - a_p, b_s - b_p)


def navier_green(d, x, y, params: ElasticParams):
    """Green tensor of the time-harmonic Navier equation.

    ``G = Phi(kappa_s) I / mu + grad grad^T (Phi(kappa_s) - Phi(kappa_p)) / omega^2``
    """
    diff, r = _differences(d, x, y)
    return _navier(d, diff, r, params)


def _navier(d, diff, r, params):
    g = _hess_diff(d, diff, r, params) / params.omega**2
    g += (np.asarray(phi_radial(d, r, params.kappa_s)) / params.mu)[..., None, None] * np.eye(d)
    return g


def navier_green_trunc(x, y, params: ElasticParams):
    """2D Green tensor with Hankel functions replaced by ``H_{0,2}``, ``H_{1,3}``, ``H_{2,4}``."""
    diff, r = _differences(2, x, y)
    return _navier_trunc(diff, r, params)


def _navier_trunc(diff, r, params):
    ks, kp, w2 = params.kappa_s, params.kappa_p, params.omega**2
    a = -0.25j * (ks * hankel1_asym(1, 3, ks * r) - kp * hankel1_asym(1, 3, kp * r)) / r
    b = 0.25j * (ks**2 * hankel1_asym(2, 4, ks * r) - kp**2 * hankel1_asym(2, 4, kp * r))
    g = _assemble(diff, r, a / w2, b / w2)
    g += (0.25j * np.asarray(hankel1_asym(0, 2, ks * r)) / params.mu)[..., None, None] * np.eye(2)
    return g
