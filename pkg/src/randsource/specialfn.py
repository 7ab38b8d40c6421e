"""Bessel and Hankel functions of integer order 0, 1, 2 for real positive arguments.

Small arguments use the ascending series, summed in extended precision to
contain the cancellation between large alternating terms. Large arguments
use the Hankel asymptotic expansion truncated at (or before) its smallest
term. The truncated expansions ``H_{n,N}`` used by the high-frequency
approximations of the radiated fields are exposed separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EULER_GAMMA = 0.5772156649015329

#: Arguments at or below this value are evaluated by the ascending series.
SERIES_CUTOFF = 14.0

_SERIES_TERMS = 64
_ASYMPTOTIC_TOL = 1e-17
_ORDERS = (0, 1, 2)


class DomainError(ValueError):
    """Argument outside the domain where the function is defined."""


class UnsupportedOrderError(ValueError):
    """Only orders 0, 1 and 2 are implemented."""


def _check_order(n):
    if n not in _ORDERS:
        raise UnsupportedOrderError(f"order must be one of {_ORDERS}, got {n!r}")


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, arr.ndim == 0


def hankel_symbol(n: int, j: int) -> float:
    """Hankel's symbol ``(n, j) = prod_{k=1..j} (4n^2 - (2k-1)^2) / (4^j j!)``."""
    value = 1.0
    for k in range(1, j + 1):
        value *= (4 * n * n - (2 * k - 1) ** 2) / (4.0 * k)
    return value


# ---------------------------------------------------------------------------
# ascending series
# ---------------------------------------------------------------------------

def _series_jy(n, t):
    """J_n and Y_n by the ascending series, in long double; ``t > 0`` assumed."""
    x = t.astype(np.longdouble)
    half = x / 2
    q = -(half * half)
    # term_p = (-1)^p (t/2)^(n+2p) / (p! (n+p)!)
    term = half**n / math.factorial(n)
    harm_p = np.longdouble(0.0)
    harm_np = np.longdouble(sum(1.0 / k for k in range(1, n + 1)))
    j_sum = term.copy()
    psi_sum = term * (harm_p + harm_np)
    for p in range(1, _SERIES_TERMS):
        term = term * q / (p * (n + p))
        harm_p += np.longdouble(1.0) / p
        harm_np += np.longdouble(1.0) / (n + p)
        j_sum += term
        psi_sum += term * (harm_p + harm_np)
    pi = np.longdouble(np.pi)
    finite = np.zeros_like(x)
    for p in range(n):
        finite += math.factorial(n - 1 - p) / math.factorial(p) * (2 / x) ** (n - 2 * p)
    y_sum = (2 / pi) * (np.log(half) + np.longdouble(EULER_GAMMA)) * j_sum - finite / pi - psi_sum / pi
    return j_sum.astype(float), y_sum.astype(float)


# ---------------------------------------------------------------------------
# asymptotic expansion
# ---------------------------------------------------------------------------

def _asymptotic_terms(n, t_min):
    """Number of terms such that the first omitted term is below tolerance."""
    j = 0
    mag = 1.0
    while True:
        nxt = abs(mag * (4 * n * n - (2 * j + 1) ** 2) / (4.0 * (j + 1))) / (2.0 * t_min)
        if nxt < _ASYMPTOTIC_TOL or nxt > mag:
            return j + 1
        mag = nxt
        j += 1


def _asymptotic_h(n, t):
    """H_n^(1)(t) from the Hankel expansion; ``t`` large."""
    nterms = _asymptotic_terms(n, float(t.min()))
    inv = 1j / (2.0 * t)
    coeffs = [hankel_symbol(n, j) for j in range(nterms)]
    acc = np.full(t.shape, coeffs[-1], dtype=complex)
    for c in coeffs[-2::-1]:
        acc = acc * inv + c
    phase = (np.cos(t) + 1j * np.sin(t)) * np.exp(-1j * (n / 2 + 0.25) * np.pi)
    return np.sqrt(2.0 / (np.pi * t)) * phase * acc


def _jy(n, t):
    out_j = np.empty(t.shape)
    out_y = np.empty(t.shape)
    small = t <= SERIES_CUTOFF
    if small.any():
        out_j[small], out_y[small] = _series_jy(n, t[small])
    large = ~small
    if large.any():
        h = _asymptotic_h(n, t[large])
        out_j[large] = h.real
        out_y[large] = h.imag
    return out_j, out_y


# ---------------------------------------------------------------------------
# public functions
# ---------------------------------------------------------------------------

def bessel(kind: str, n: int, t):
    """Bessel function of the first (``"J"``) or second (``"Y"``) kind.

    Parameters
    ----------
    kind : {"J", "Y"}
    n : int
        Order, 0, 1 or 2.
    t : float or array_like
        Argument. ``J`` accepts ``t = 0``; ``Y`` requires ``t > 0``.
    """
    _check_order(n)
    if kind not in ("J", "Y"):
        raise ValueError(f"kind must be 'J' or 'Y', got {kind!r}")
    arr, scalar = _as_array(t)
    if kind == "Y" and np.any(arr <= 0):
        raise DomainError("Y_n requires t > 0")
    if np.any(arr < 0):
        raise DomainError("J_n requires t >= 0")
    out = np.zeros(arr.shape)
    zero = arr == 0
    if zero.any():
        out[zero] = 1.0 if n == 0 else 0.0
    pos = ~zero
    if pos.any():
        j, y = _jy(n, arr[pos])
        out[pos] = j if kind == "J" else y
    return float(out) if scalar else out


def hankel1(n: int, t):
    """Hankel function of the first kind ``H_n^(1)(t) = J_n(t) + i Y_n(t)``."""
    _check_order(n)
    arr, scalar = _as_array(t)
    if np.any(arr <= 0):
        raise DomainError("H_n^(1) requires t > 0")
    j, y = _jy(n, arr)
    out = j + 1j * y
    return complex(out) if scalar else out


@dataclass(frozen=True)
class HankelTruncation:
    """The first ``terms + 1`` terms of the large-argument expansion of ``H_order``.

    Coefficients are ``a_j = (-2i)^(-j) sqrt(2/pi) (n, j)``.
    """

    order: int
    terms: int
    coefficients: tuple = field(init=False, repr=False)

    def __post_init__(self):
        _check_order(self.order)
        if self.terms < 0:
            raise ValueError("terms must be >= 0")
        root = math.sqrt(2.0 / math.pi)
        coeffs = tuple(
            (-2j) ** (-j) * root * hankel_symbol(self.order, j) for j in range(self.terms + 1)
        )
        object.__setattr__(self, "coefficients", coeffs)


def hankel1_trunc(trunc: HankelTruncation, t):
    """Evaluate the truncated expansion ``H_{n,N}^(1)(t)``."""
    arr, scalar = _as_array(t)
    if np.any(arr <= 0):
        raise DomainError("H_{n,N}^(1) requires t > 0")
    inv = 1.0 / arr
    acc = np.full(arr.shape, trunc.coefficients[-1], dtype=complex)
    for c in trunc.coefficients[-2::-1]:
        acc = acc * inv + c
    n = trunc.order
    phase = (np.cos(arr) + 1j * np.sin(arr)) * np.exp(-1j * (n / 2 + 0.25) * np.pi)
    out = np.sqrt(inv) * phase * acc
    return complex(out) if scalar else out


def hankel1_asym(n: int, terms: int, t):
    """Shorthand for ``hankel1_trunc(HankelTruncation(n, terms), t)``."""
    return hankel1_trunc(_truncation(n, terms), t)


_TRUNC_CACHE: dict = {}


def _truncation(n, terms):
    key = (n, terms)
    if key not in _TRUNC_CACHE:
        _TRUNC_CACHE[key] = HankelTruncation(n, terms)
    return _TRUNC_CACHE[key]
