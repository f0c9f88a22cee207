"""Interactions, the periodic Hamiltonian and its twisted relatives.

An :class:`Interaction` is stored fully expanded on the finite lattice: one
:class:`Term` per finite set X with Phi_L(X) != 0.  Terms that cross the seam
between column L and column 1 carry ``wraps=True``; dropping them gives the
non-periodic interaction Phi used in the twist perturbations.

The range R is the largest column separation inside a support (R = 1 for
nearest-neighbour bonds) and admissible twist columns satisfy
R <= m <= L/2 - R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .algebra import (
    LocalOperator,
    embed_matrix,
    s3_diagonal,
    spin_matrices,
    translation_operator,
    translation_permutation,
)
from .errors import DomainError, LSMConditionError, ModelError
from .lattice import Lattice, Site


@dataclass(frozen=True, eq=False)
class Term:
    sites: tuple
    matrix: np.ndarray
    wraps: bool = False

    def columns(self, lattice: Lattice) -> list[int]:
        return [lattice.column(x) for x in self.sites]


@dataclass(frozen=True, eq=False)
class Interaction:
    lattice: Lattice
    terms: tuple
    name: str = "custom"
    params: Mapping = field(default_factory=dict)

    @property
    def range(self) -> int:
        R = 0
        for t in self.terms:
            cols = t.columns(self.lattice)
            for a in cols:
                for b in cols:
                    R = max(R, self.lattice.column_distance(a, b))
        return R

    @property
    def rotation_invariant(self) -> bool:
        return all(_commutes_with_s3(self.lattice, t) for t in self.terms)

    @property
    def real(self) -> bool:
        return all(np.abs(t.matrix.imag).max(initial=0.0) == 0.0 for t in self.terms)

    def nonperiodic_terms(self):
        return [t for t in self.terms if not t.wraps]


def _local_dims(lattice: Lattice, sites) -> list[int]:
    dims = lattice.site_dims()
    return [dims[x] for x in sites]


def _local_s3(lattice: Lattice, sites, select) -> np.ndarray:
    """Diagonal of sum of S3 over sites[i] with select[i] true, on the local space."""
    dims = _local_dims(lattice, sites)
    D = int(np.prod(dims))
    idx = np.arange(D)
    out = np.zeros(D)
    stride = 1
    for pos in range(len(sites) - 1, -1, -1):
        d = dims[pos]
        if select[pos]:
            s = float(lattice.spins[sites[pos] % lattice.legs])
            out += s - (idx // stride) % d
        stride *= d
    return out


def _commutes_with_s3(lattice: Lattice, term: Term) -> bool:
    s = _local_s3(lattice, term.sites, [True] * len(term.sites))
    M = term.matrix
    comm = s[:, None] * M - M * s[None, :]
    return np.abs(comm).max(initial=0.0) <= 1e-12 * max(1.0, np.abs(M).max(initial=0.0))


# -- built-in interactions ---------------------------------------------------


def bond_matrix(s1, s2, J: float = 1.0, delta: float = 1.0) -> np.ndarray:
    """J (S1.S1 + S2.S2 + delta S3.S3) on two sites."""
    a, b = spin_matrices(s1), spin_matrices(s2)
    M = np.kron(a.S1, b.S1) + np.kron(a.S2, b.S2) + delta * np.kron(a.S3, b.S3)
    # S1 x S1 + S2 x S2 is real; drop the zero imaginary part so LSM6 holds exactly
    return (J * M).real.astype(complex)


def _bond_term(lattice: Lattice, x: Site, y: Site, J: float, delta: float) -> Term:
    i, j = lattice.index(x), lattice.index(y)
    wraps = y.n < x.n
    si, sj = lattice.spins[x.v], lattice.spins[y.v]
    M = bond_matrix(si, sj, J, delta)
    if i > j:
        i, j = j, i
        M = bond_matrix(sj, si, J, delta)
    return Term((i, j), M, wraps)


def heisenberg(
    lattice: Lattice,
    J: float = 1.0,
    J_rung: float | None = None,
    delta: float = 1.0,
    couplings: Mapping | None = None,
) -> Interaction:
    """Nearest-neighbour Heisenberg / XXZ model on the lattice edges.

    ``couplings`` maps a pair of flat site indices (sorted) to a coupling
    overriding the default leg (``J``) or rung (``J_rung``, default ``J``)
    value.
    """
    J_rung = J if J_rung is None else J_rung
    couplings = {tuple(sorted(k)): v for k, v in (couplings or {}).items()}
    terms = []
    for i, j in lattice.edges:
        x, y = lattice.site(i), lattice.site(j)
        Jxy = J if x.v == y.v else J_rung
        Jxy = couplings.get(tuple(sorted((i, j))), Jxy)
        if Jxy == 0.0:
            continue
        terms.append(_bond_term(lattice, x, y, Jxy, delta))
    name = "heisenberg" if delta == 1.0 else "xxz"
    return Interaction(lattice, tuple(terms), name, {"J": J, "J_rung": J_rung, "delta": delta})


def dimerized_chain(L: int, strong: float = 1.0, weak: float = 0.25) -> Interaction:
    """Spin-1/2 ring with bonds alternating strong (odd n) / weak (even n)."""
    lat = Lattice(L)
    couplings = {}
    for n in range(1, L + 1):
        i, j = lat.index(Site(n)), lat.index(Site(n % L + 1))
        couplings[(i, j)] = strong if n % 2 else weak
    inter = heisenberg(lat, couplings=couplings)
    return Interaction(lat, inter.terms, "dimerized", {"strong": strong, "weak": weak})


# -- Hamiltonian ------------------------------------------------------------------


def terms_matrix(lattice: Lattice, terms: Sequence[Term]) -> sp.csr_matrix:
    dims = lattice.site_dims()
    D = int(np.prod(dims))
    H = sp.csr_matrix((D, D), dtype=complex)
    for t in terms:
        H = H + embed_matrix(t.sites, t.matrix, dims)
    return H.tocsr()


def build_hamiltonian(interaction: Interaction, check_range: bool = True) -> sp.csr_matrix:
    """H = sum over X of Phi_L(X), periodic in the 1-direction."""
    lat = interaction.lattice
    R = interaction.range
    if check_range and lat.L < 4 * R:
        raise ModelError(f"twist windows do not fit: L={lat.L} < 4R={4 * R}")
    return terms_matrix(lat, interaction.terms)


# -- twists ------------------------------------------------------------------------


@lru_cache(maxsize=32)
def column_s3(lattice: Lattice) -> np.ndarray:
    """Row n-1 holds the diagonal of sum_v S3_(n,v)."""
    return np.array([s3_diagonal(lattice, lattice.column_sites(n)) for n in range(1, lattice.L + 1)])


def column_phase(lattice: Lattice, columns, theta: float) -> np.ndarray:
    """Diagonal of prod over n in ``columns`` of U_n(theta)."""
    cols = [lattice.wrap(n) - 1 for n in columns]
    s = column_s3(lattice)[cols].sum(axis=0) if cols else np.zeros(lattice.hilbert_dim())
    return np.exp(1j * theta * s)


def _diag(v: np.ndarray) -> sp.csr_matrix:
    return sp.diags(v, format="csr")


@dataclass(frozen=True)
class TwistConfig:
    theta: float = 0.0
    theta_prime: float = 0.0
    m: int | None = None

    def resolve(self, interaction: Interaction) -> "TwistConfig":
        """Fill in the default twist column and validate R <= m <= L/2 - R."""
        L, R = interaction.lattice.L, max(interaction.range, 1)
        m = default_twist_column(L, R) if self.m is None else self.m
        if not R <= m <= L // 2 - R:
            raise ModelError(f"twist column m={m} outside [{R}, {L // 2 - R}]")
        return TwistConfig(self.theta, self.theta_prime, m)


def default_twist_column(L: int, R: int) -> int:
    return min(max(math.ceil(L / 4), R), L // 2 - R)


class TwistUnitaries(NamedTuple):
    columns: list
    V_m: sp.csr_matrix
    W: sp.csr_matrix
    U: sp.csr_matrix


def twist_unitaries(lattice: Lattice, theta: float, m: int) -> TwistUnitaries:
    """Column rotations U_n(theta), V_m(theta), W(theta), global U(theta)."""
    L = lattice.L
    cols = [_diag(column_phase(lattice, [n], theta)) for n in range(1, L + 1)]
    V = _diag(column_phase(lattice, range(m + 1, L + 1), theta))
    W = _diag(window_rotation(lattice, m, theta))
    U = _diag(column_phase(lattice, range(1, L + 1), theta))
    return TwistUnitaries(cols, V, W, U)


def window_rotation(lattice: Lattice, m: int, phi: float) -> np.ndarray:
    """Diagonal of W(phi) = prod over m < n <= m + L/2 of U_n(-phi)."""
    return column_phase(lattice, range(m + 1, m + lattice.L // 2 + 1), -phi)


def _twisted_local(lattice: Lattice, term: Term, m: int, theta: float, derivative: bool = False):
    right = [lattice.column(x) > m for x in term.sites]
    s = _local_s3(lattice, term.sites, right)
    ph = np.exp(1j * theta * s)
    M = term.matrix
    twisted = ph.conj()[:, None] * M * ph[None, :]
    if derivative:
        # d/dtheta V* M V = -i V* [S_right, M] V
        return -1j * (s[:, None] * twisted - twisted * s[None, :])
    return twisted - M


def _twist_terms(interaction: Interaction, m: int) -> list[Term]:
    lat = interaction.lattice
    inv = interaction.rotation_invariant
    out = []
    for t in interaction.nonperiodic_terms():
        cols = t.columns(lat)
        right = [c > m for c in cols]
        if any(right) and (not all(right) or not inv):
            out.append(t)
    return out


def twist_perturbation(interaction: Interaction, m: int, theta: float) -> sp.csr_matrix:
    """H_theta(m) = sum over X of V_m(theta)* Phi(X) V_m(theta) - Phi(X), non-periodic Phi."""
    lat = interaction.lattice
    dims = lat.site_dims()
    D = int(np.prod(dims))
    out = sp.csr_matrix((D, D), dtype=complex)
    for t in _twist_terms(interaction, m):
        out = out + embed_matrix(t.sites, _twisted_local(lat, t, m, theta), dims)
    return out.tocsr()


def window_columns(lattice: Lattice, y: int, R: int) -> list[int]:
    """Columns n with ring distance |n - y| <= L/4 - R, widened to radius 1 if empty of neighbours."""
    radius = max(1, math.floor(lattice.L / 4 - R))
    return sorted({lattice.wrap(y + k) for k in range(-radius, radius + 1)})


class TwistedHamiltonian(NamedTuple):
    full: sp.csr_matrix
    single: sp.csr_matrix
    window: sp.csr_matrix
    strip: sp.csr_matrix
    window_m: list
    window_m2: list


def twisted_hamiltonian(H: sp.spmatrix, interaction: Interaction, cfg: TwistConfig) -> TwistedHamiltonian:
    """H_{theta,theta'} = H + H_theta(m) + H_theta'(m + L/2) with its window/strip split.

    ``single`` is H_theta(m).  ``window + strip == full`` exactly, where
    ``strip`` collects the (untwisted) terms touching the strips.
    """
    cfg = cfg.resolve(interaction)
    lat = interaction.lattice
    m, L = cfg.m, lat.L
    R = max(interaction.range, 1)
    single = twist_perturbation(interaction, m, cfg.theta)
    second = twist_perturbation(interaction, m + L // 2, cfg.theta_prime)
    full = (sp.csr_matrix(H) + single + second).tocsr()
    wm, wm2 = window_columns(lat, m, R), window_columns(lat, m + L // 2, R)
    win_cols = set(wm) | set(wm2)
    strip_terms = [t for t in interaction.terms if any(c not in win_cols for c in t.columns(lat))]
    strip = terms_matrix(lat, strip_terms)
    window = (full - strip).tocsr()
    return TwistedHamiltonian(full, single, window, strip, wm, wm2)


def twist_derivative(interaction: Interaction, cfg: TwistConfig) -> tuple[LocalOperator, LocalOperator]:
    """(A1, A2): d/dtheta of H_theta(m) at cfg.theta and of H_theta'(m+L/2) at cfg.theta_prime."""
    cfg = cfg.resolve(interaction)
    lat = interaction.lattice
    out = []
    for col, ang in ((cfg.m, cfg.theta), (cfg.m + lat.L // 2, cfg.theta_prime)):
        terms = _twist_terms(interaction, col)
        support = tuple(sorted({x for t in terms for x in t.sites}))
        dims = _local_dims(lat, support)
        D = int(np.prod(dims)) if support else 1
        A = np.zeros((D, D), dtype=complex)
        pos = {x: k for k, x in enumerate(support)}
        for t in terms:
            loc = _twisted_local(lat, t, col, ang, derivative=True)
            A += embed_matrix([pos[x] for x in t.sites], loc, dims).toarray()
        out.append(LocalOperator(support, A))
    return out[0], out[1]


def twisted_translation(lattice: Lattice, cfg: TwistConfig, T: sp.spmatrix | None = None) -> sp.csr_matrix:
    """T_{theta,theta'} = U_m(theta) U_{m+L/2}(theta') T.

    With T^* S_x T = S_{x+e1} this ordering is the one commuting with
    H_{theta,theta'}; it equals T U_{m+1}(theta) U_{m+1+L/2}(theta').
    """
    if cfg.m is None:
        raise ModelError("twisted translation needs a resolved twist column")
    T = translation_operator(lattice) if T is None else T
    L = lattice.L
    ph = column_phase(lattice, [cfg.m], cfg.theta) * column_phase(lattice, [cfg.m + L // 2], cfg.theta_prime)
    return (_diag(ph) @ sp.csr_matrix(T)).tocsr()


# -- structural conditions ------------------------------------------------------------


def column_parity_sum(lattice: Lattice):
    """Sum over v of p_(n,v); identical for every column."""
    return sum(spin_matrices(s).parity for s in lattice.spins)


def odd_parity(lattice: Lattice) -> bool:
    return column_parity_sum(lattice).denominator == 2


def lsm_conditions(interaction: Interaction, H: sp.spmatrix | None = None) -> dict:
    """Boolean record of LSM1, LSM2, LSM3, LSM4 and LSM6 (LSM5 is spectral)."""
    lat = interaction.lattice
    H = build_hamiltonian(interaction, check_range=False) if H is None else H
    perm = translation_permutation(lat)
    Hc = sp.csr_matrix(H)
    # T^* H T as an index permutation
    P = sp.csr_matrix((np.ones(len(perm)), (np.arange(len(perm)), perm)), shape=Hc.shape)
    diff = P.T @ Hc @ P - Hc
    resid = abs(diff).max() if diff.nnz else 0.0
    R = interaction.range
    return {
        "LSM1": bool(resid <= 1e-12),
        "LSM2": bool(R >= 1 and lat.L >= 4 * R),
        "LSM3": interaction.rotation_invariant,
        "LSM4": odd_parity(lat),
        "LSM6": interaction.real,
    }


def require_lsm(interaction: Interaction, H: sp.spmatrix | None = None, conditions=("LSM1", "LSM2", "LSM3", "LSM4", "LSM6")):
    status = lsm_conditions(interaction, H)
    messages = {
        "LSM1": "interaction is not translation covariant in the 1-direction",
        "LSM2": "finite range does not fit: need L >= 4R",
        "LSM3": "interaction does not commute with the S3 rotations",
        "LSM4": "columns do not have odd parity (sum of p over V_L must be half-integer)",
        "LSM6": "interaction is not real in the product basis",
    }
    for c in conditions:
        if not status[c]:
            raise LSMConditionError(c, messages[c])
    return status
