"""The filter weight F_{a,T}(E) and its vectorized table."""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from ..errors import DomainError, NumericError
from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
if os.environ.get("LSMLAB_KERNEL") == "numpy":
    _compiled = None

KERNEL = "compiled" if _compiled is not None else "numpy"


@dataclass(frozen=True)
class FilterParams:
    """Gaussian width ``a``, time cutoff ``T`` and optional s-cutoff ``M``."""

    a: float
    T: float
    M: float | None = None

    def __post_init__(self):
        if not self.a > 0 or not self.T > 0:
            raise DomainError(f"filter parameters need a > 0 and T > 0, got a={self.a}, T={self.T}")
        if self.M is not None and not self.M > 0:
            raise DomainError(f"cutoff M must be positive, got {self.M}")

    @classmethod
    def from_gap(cls, gap: float, L: int) -> "FilterParams":
        """a = gap / L, T = L / 2."""
        return cls(gap / L, L / 2)


def envelope_cutoff(a: float, c2: float, c3: float) -> float:
    """Positive root of a M^2 + c2 M - c3 = 0."""
    if not c3 > 0:
        raise DomainError("c3 must be positive")
    return (-c2 + math.sqrt(c2 * c2 + 4 * a * c3)) / (2 * a)


def truncation_bound(params: FilterParams, M: float, normA: float) -> float:
    """(T / 2M)(||A|| / sqrt(pi a)) e^{-a M^2}."""
    a, T = params.a, params.T
    return T / (2 * M) * normA / math.sqrt(math.pi * a) * math.exp(-a * M * M)


def truncation_cutoff(params: FilterParams, normA: float, tol: float = 1e-13) -> float:
    """Smallest M (to a few percent) whose truncation bound is below ``tol``."""
    a = params.a
    M = math.sqrt(max(1.0, math.log(max(normA, 1e-300) * params.T / tol)) / a)
    for _ in range(60):
        if truncation_bound(params, M, normA) <= tol:
            break
        M *= 1.05
    return M


@lru_cache(maxsize=8)
def _gl(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def gl_panels(lo: float, hi: float, panels: int, order: int = 16, grade: int = 0):
    """Composite Gauss-Legendre nodes and weights on [lo, hi].

    ``grade`` > 0 adds that many geometrically shrinking panels toward ``lo``
    inside the first uniform panel (for endpoint singularities).
    """
    x, w = _gl(order)
    edges = np.linspace(lo, hi, panels + 1)
    if grade:
        first = edges[1]
        inner = lo + (first - lo) * 2.0 ** -np.arange(grade, 0, -1)
        edges = np.concatenate([[lo], inner, edges[1:]])
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x[None, :] + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w[None, :]).ravel()
    return nodes, weights


def default_panels(params: FilterParams, Emax: float) -> int:
    scale = max(abs(Emax), math.sqrt(params.a), 1.0 / params.T)
    return int(min(4096, max(4, math.ceil(params.T * scale / 2.0))))


def filter_weight(params: FilterParams, E: float, epsrel: float = 1e-12) -> float:
    """F_{a,T}(E) = (1/2) int_0^T e^{tE} erfc((E + 2at) / 2 sqrt(a)) dt, by adaptive quadrature."""
    a, T = params.a, params.T
    f = lambda t: float(_fallback.integrand(t, E, a))
    # split where e^{tE} changes on its own scale
    points = [min(T, k / abs(E)) for k in (1, 4, 16)] if E else None
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, 0.0, T, epsabs=0.0, epsrel=epsrel, limit=400, points=points)
        except integrate.IntegrationWarning as exc:
            raise NumericError(f"F_(a,T)({E}) quadrature did not converge: {exc}") from exc
    return 0.5 * val


def weight_table(E, params: FilterParams, panels: int | None = None, order: int = 16, kernel: str | None = None) -> np.ndarray:
    """F_{a,T} on an array of energies via composite Gauss-Legendre in t."""
    E = np.asarray(E, dtype=float)
    flat = np.ascontiguousarray(E.ravel())
    if panels is None:
        panels = default_panels(params, np.abs(flat).max(initial=0.0))
    nodes, weights = gl_panels(0.0, params.T, panels, order)
    kernel = kernel or KERNEL
    if kernel == "compiled":
        if _compiled is None:
            raise DomainError("compiled kernel not available")
        out = np.asarray(_compiled.weight_table(flat, params.a, nodes, weights))
    elif kernel == "numpy":
        out = _fallback.weight_table(flat, params.a, nodes, weights)
    else:
        raise DomainError(f"unknown kernel {kernel!r}")
    return out.reshape(E.shape)
