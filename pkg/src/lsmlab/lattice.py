"""Finite lattices [1, L] x V_L with a periodic 1-direction.

Sites are stored flat, column-major in the 1-direction: the site (n, v) has
flat index ``(n - 1) * width + v`` with ``n`` in ``1..L`` and ``v`` in
``0..width-1``.  This ordering is also the tensor-factor ordering of the
Hilbert space (see :mod:`lsmlab.algebra`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.special import comb, zeta

from .errors import DomainError, ModelError

GEOMETRIES = ("ring", "ladder", "cylinder")


@dataclass(frozen=True)
class Site:
    n: int
    v: int = 0


@dataclass(frozen=True, eq=False)
class Lattice:
    """Lambda_L = [1, L] x V_L with graph distance on nearest-neighbour edges.

    Parameters
    ----------
    L : int
        Extent of the periodic 1-direction. Must be even.
    legs : int
        Number of transverse sites, |V_L|.
    geometry : {"ring", "ladder", "cylinder"}
        ``ring`` requires ``legs == 1``. ``cylinder`` closes the rungs
        periodically (only meaningful for ``legs >= 3``).
    spins : sequence of Fraction, optional
        Spin magnitude of each transverse site (same in every column).
        Defaults to spin 1/2 everywhere.
    """

    L: int
    legs: int = 1
    geometry: str = "ring"
    spins: tuple = ()

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise DomainError(f"unknown geometry {self.geometry!r}")
        if self.L < 2 or self.L % 2:
            raise DomainError(f"L must be even, got {self.L}")
        if self.legs < 1:
            raise DomainError("legs must be >= 1")
        if self.geometry == "ring" and self.legs != 1:
            raise DomainError("ring geometry has a single leg")
        spins = tuple(Fraction(s) for s in self.spins) or (Fraction(1, 2),) * self.legs
        if len(spins) != self.legs:
            raise DomainError(f"expected {self.legs} spin magnitudes, got {len(spins)}")
        for s in spins:
            if s <= 0 or (2 * s).denominator != 1:
                raise DomainError(f"spin magnitude must be a positive half-integer, got {s}")
        object.__setattr__(self, "spins", spins)

    # -- geometry ---------------------------------------------------------

    @property
    def width(self) -> int:
        return self.legs

    @property
    def n_sites(self) -> int:
        return self.L * self.legs

    @property
    def dimension(self) -> int:
        """The dimension label d used in the decay function exponent."""
        return 1 if self.legs == 1 else 2

    @property
    def transverse_constant(self) -> float:
        """c in |V_L| <= c L^(d-1)."""
        return self.legs / self.L ** (self.dimension - 1)

    def index(self, site: Site) -> int:
        if not (1 <= site.n <= self.L) or not (0 <= site.v < self.legs):
            raise DomainError(f"site {site} is not in the lattice (L={self.L}, legs={self.legs})")
        return (site.n - 1) * self.legs + site.v

    def site(self, i: int) -> Site:
        if not 0 <= i < self.n_sites:
            raise DomainError(f"flat index {i} out of range")
        return Site(i // self.legs + 1, i % self.legs)

    def column(self, i: int) -> int:
        return i // self.legs + 1

    def column_sites(self, n: int) -> list[int]:
        """Flat indices of the column (n, V_L); n is taken mod L."""
        n = (n - 1) % self.L + 1
        return [(n - 1) * self.legs + v for v in range(self.legs)]

    def wrap(self, n: int) -> int:
        return (n - 1) % self.L + 1

    def column_distance(self, n1: int, n2: int) -> int:
        k = abs(n1 - n2) % self.L
        return min(k, self.L - k)

    @cached_property
    def edges(self) -> list[tuple[int, int]]:
        out = []
        W = self.legs
        for n in range(1, self.L + 1):
            nxt = n % self.L + 1
            for v in range(W):
                out.append((self.index(Site(n, v)), self.index(Site(nxt, v))))
            for v in range(W - 1):
                out.append((self.index(Site(n, v)), self.index(Site(n, v + 1))))
            if self.geometry == "cylinder" and W > 2:
                out.append((self.index(Site(n, W - 1)), self.index(Site(n, 0))))
        return out

    @cached_property
    def distances(self) -> np.ndarray:
        """All-pairs graph distance, shape (n_sites, n_sites)."""
        N = self.n_sites
        e = np.array(self.edges, dtype=int)
        g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(N, N)).tocsr()
        return shortest_path(g, directed=False, unweighted=True)

    def site_dims(self) -> list[int]:
        return [int(2 * self.spins[i % self.legs] + 1) for i in range(self.n_sites)]

    def hilbert_dim(self) -> int:
        return int(np.prod(self.site_dims()))


def distance(lattice: Lattice, x: Site, y: Site) -> float:
    return float(lattice.distances[lattice.index(x), lattice.index(y)])


@dataclass(frozen=True)
class DecayFunction:
    """F_lambda(r) = exp(-lam r) F(r) with a strictly positive base F."""

    base: Callable[[np.ndarray], np.ndarray]
    lam: float = 1.0
    label: str = "custom"

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-self.lam * r) * self.base(r)

    def with_lambda(self, lam: float) -> "DecayFunction":
        return DecayFunction(self.base, lam, self.label)

    @property
    def unweighted(self) -> "DecayFunction":
        return self.with_lambda(0.0)

    @classmethod
    def polynomial(cls, d: int, eps: float = 1.0, lam: float = 1.0) -> "DecayFunction":
        power = d + eps

        def base(r):
            return (1.0 + np.asarray(r, dtype=float)) ** (-power)

        return cls(base, lam, f"(1+r)^-{power:g}")


def decay_constants(lattice: Lattice, F: DecayFunction) -> tuple[float, float]:
    """Return (||F_lam||, C(F_lam)) as exact finite-lattice sups."""
    Fm = F(lattice.distances)
    if np.any(Fm <= 0) or not np.all(np.isfinite(Fm)):
        raise DomainError("decay function must be positive and finite on all realised distances")
    norm = float(Fm.sum(axis=1).max())
    conv = float(((Fm @ Fm) / Fm).max())
    return norm, conv


def lattice_series_bound(d: int, eps: float) -> float:
    """2^(d+eps+1) * sum over n in Z^d of (1+|n|_1)^-(d+eps).

    The sum is evaluated exactly via Riemann zeta values: the number of
    points with |n|_1 = k is a polynomial in k.
    """
    s = d + eps
    # N_d(k) = sum_i 2^i C(d,i) C(k-1,i-1); expand in j = k + 1.
    j = np.polynomial.Polynomial([0.0, 1.0])
    k = j - 1
    count = np.polynomial.Polynomial([0.0])
    for i in range(1, d + 1):
        binom = np.polynomial.Polynomial([1.0])
        for r in range(i - 1):
            binom = binom * (k - 1 - r) / (r + 1)
        count = count + (2 ** i) * comb(d, i) * binom
    total = 1.0
    for p, c in enumerate(count.coef):
        if abs(c) < 1e-15:
            continue
        if s - p <= 1:
            return math.inf
        total += c * (zeta(s - p) - 1.0)
    return 2.0 ** (s + 1) * total


def _term_norm(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix, 2)) if matrix.size else 0.0


def interaction_norms(lattice: Lattice, interaction, F: DecayFunction) -> tuple[float, float, float]:
    """Return (||Phi||_lam, |||Phi|||_1, |||Phi|||_2) for the finite-volume interaction.

    ``interaction`` is anything exposing ``terms`` whose items carry
    ``sites`` (flat indices) and ``matrix``; the periodic extension is
    what gets summed, i.e. every term of H.
    """
    from .algebra import spin_matrices  # local: algebra imports lattice

    N = lattice.n_sites
    dist = lattice.distances
    Fl = F(dist)
    pair = np.zeros((N, N))
    one = np.zeros(N)
    two = np.zeros(N)
    s3 = [spin_matrices(lattice.spins[i % lattice.legs]).S3 for i in range(N)]
    for term in interaction.terms:
        M = term.matrix
        if np.linalg.norm(M - M.conj().T) > 1e-12 * max(1.0, np.linalg.norm(M)):
            raise ModelError(f"interaction term on sites {term.sites} is not hermitian")
        nrm = _term_norm(M)
        if nrm == 0.0:
            continue
        X = list(term.sites)
        dims = [s3[x].shape[0] for x in X]
        comm_sum = 0.0
        for pos, x in enumerate(X):
            S = _local_single(s3[x], pos, dims)
            comm_sum += _term_norm(S @ M - M @ S)
        for x in X:
            one[x] += nrm
            two[x] += len(X) * comm_sum
            for y in X:
                pair[x, y] += nrm
    phi_lam = float((pair / Fl).max()) if N else 0.0
    return phi_lam, float(one.max()), float(two.max())


def _local_single(op: np.ndarray, pos: int, dims: Sequence[int]) -> np.ndarray:
    left = int(np.prod(dims[:pos]))
    right = int(np.prod(dims[pos + 1:]))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))
