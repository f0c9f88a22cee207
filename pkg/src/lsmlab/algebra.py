"""Hilbert-space plumbing for finite spin systems.

Basis convention: lexicographic product basis, the flat site index of
:class:`~lsmlab.lattice.Lattice` giving the tensor-factor order (site 0 is
the most significant factor).  Embedded operators are sparse CSR matrices;
states and density matrices are dense.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ModelError


@dataclass(frozen=True, eq=False)
class SpinSite:
    s: Fraction
    S1: np.ndarray
    S2: np.ndarray
    S3: np.ndarray

    @property
    def dim(self) -> int:
        return self.S3.shape[0]

    @property
    def parity(self) -> Fraction:
        """1/2 for half-integer spin, 0 otherwise."""
        return Fraction(1, 2) if (2 * self.s) % 2 else Fraction(0)


@lru_cache(maxsize=None)
def spin_matrices(s) -> SpinSite:
    """Spin-s generators with S3 = diag(s, s-1, ..., -s)."""
    s = Fraction(s)
    if s <= 0 or (2 * s).denominator != 1:
        raise DomainError(f"spin magnitude must be a positive half-integer, got {s}")
    dim = int(2 * s + 1)
    m = np.array([float(s) - k for k in range(dim)])
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1))
    sp_ = np.zeros((dim, dim))
    for k in range(1, dim):
        sp_[k - 1, k] = np.sqrt(float(s * (s + 1)) - m[k] * (m[k] + 1))
    sm = sp_.T
    S1 = (sp_ + sm) / 2
    S2 = (sp_ - sm) / 2j
    S3 = np.diag(m)
    S1, S3 = S1.astype(complex), S3.astype(complex)
    for M in (S1, S2, S3):
        M.setflags(write=False)
    return SpinSite(s, S1, S2, S3)


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """An operator on the tensor factors of ``sites`` (sorted flat indices)."""

    sites: tuple
    matrix: np.ndarray

    def __post_init__(self):
        sites = tuple(int(x) for x in self.sites)
        if list(sites) != sorted(set(sites)):
            raise DomainError(f"support must be sorted and distinct, got {sites}")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def adjoint(self) -> "LocalOperator":
        return LocalOperator(self.sites, self.matrix.conj().T)


def _strides(dims: Sequence[int]) -> np.ndarray:
    out = np.ones(len(dims), dtype=np.int64)
    for i in range(len(dims) - 2, -1, -1):
        out[i] = out[i + 1] * dims[i + 1]
    return out


def _offsets(sites: Sequence[int], dims: Sequence[int], strides: np.ndarray) -> np.ndarray:
    """Full-space index offset of every configuration of ``sites``."""
    off = np.zeros(1, dtype=np.int64)
    for x in sites:
        off = (off[:, None] + np.arange(dims[x], dtype=np.int64)[None, :] * strides[x]).ravel()
    return off


def embed_matrix(sites: Sequence[int], matrix: np.ndarray, dims: Sequence[int]) -> sp.csr_matrix:
    """Kron-embed ``matrix`` acting on ``sites`` into the full product space."""
    sites = list(sites)
    N = len(dims)
    if any(x < 0 or x >= N for x in sites):
        raise DomainError(f"support {sites} outside lattice of {N} sites")
    local_dim = int(np.prod([dims[x] for x in sites])) if sites else 1
    if matrix.shape != (local_dim, local_dim):
        raise DomainError(f"matrix shape {matrix.shape} does not match support dimension {local_dim}")
    strides = _strides(dims)
    rest = [x for x in range(N) if x not in set(sites)]
    off_sup = _offsets(sites, dims, strides)
    off_rest = _offsets(rest, dims, strides)
    r, c = np.nonzero(matrix)
    vals = matrix[r, c]
    rows = (off_sup[r][:, None] + off_rest[None, :]).ravel()
    cols = (off_sup[c][:, None] + off_rest[None, :]).ravel()
    data = np.repeat(vals, len(off_rest))
    D = int(np.prod(dims))
    return sp.csr_matrix((data, (rows, cols)), shape=(D, D))


def embed(op: LocalOperator, lattice) -> sp.csr_matrix:
    return embed_matrix(op.sites, op.matrix, lattice.site_dims())


def site_operator(lattice, x: int, which: str = "S3") -> LocalOperator:
    spin = spin_matrices(lattice.spins[x % lattice.legs])
    return LocalOperator((x,), getattr(spin, which))


def s3_diagonal(lattice, sites: Iterable[int]) -> np.ndarray:
    """Diagonal of sum_{x in sites} S3_x in the product basis (real)."""
    dims = lattice.site_dims()
    strides = _strides(dims)
    D = int(np.prod(dims))
    idx = np.arange(D, dtype=np.int64)
    out = np.zeros(D)
    for x in sites:
        s = float(lattice.spins[x % lattice.legs])
        digit = (idx // strides[x]) % dims[x]
        out += s - digit
    return out


def translation_permutation(lattice) -> np.ndarray:
    """perm with (T psi)[i] = psi[perm[i]] for the unit shift in the 1-direction.

    Chosen so that T^* S_x T = S_{x + e_1}.
    """
    dims = lattice.site_dims()
    W = lattice.legs
    if any(dims[i] != dims[i % W] for i in range(len(dims))):
        raise ModelError("columns must carry identical site dimensions")
    strides = _strides(dims)
    D = int(np.prod(dims))
    idx = np.arange(D, dtype=np.int64)
    N = len(dims)
    # T^* S_x T = S_{x+e1}  <=>  T moves the state of site x+e1 onto site x.
    src = np.zeros(D, dtype=np.int64)
    for x in range(N):
        y = (x + W) % N
        digit = (idx // strides[x]) % dims[x]
        src += digit * strides[y]
    return src


def translation_operator(lattice) -> sp.csr_matrix:
    perm = translation_permutation(lattice)
    D = len(perm)
    return sp.csr_matrix((np.ones(D), (np.arange(D), perm)), shape=(D, D), dtype=complex)


# -- density matrices ------------------------------------------------------


def density_matrix(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def partial_trace(rho: np.ndarray, keep: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Reduced density matrix on ``keep``.

    ``rho`` may be a state vector (treated as |psi><psi|) or a square matrix.
    The kept factors stay in increasing site order.
    """
    keep = sorted(set(int(k) for k in keep))
    N = len(dims)
    if any(k < 0 or k >= N for k in keep):
        raise DomainError(f"keep set {keep} outside the {N} sites")
    rest = [x for x in range(N) if x not in keep]
    dk = int(np.prod([dims[x] for x in keep])) if keep else 1
    dr = int(np.prod([dims[x] for x in rest])) if rest else 1
    rho = np.asarray(rho)
    if rho.ndim == 1:
        t = rho.reshape(dims).transpose(keep + rest).reshape(dk, dr)
        return t @ t.conj().T
    t = rho.reshape(list(dims) * 2)
    perm = keep + rest + [N + x for x in keep] + [N + x for x in rest]
    t = t.transpose(perm).reshape(dk, dr, dk, dr)
    return np.einsum("ajbj->ab", t)


def trace_norm(M: np.ndarray) -> float:
    return float(np.linalg.svd(np.asarray(M), compute_uv=False).sum())


def zero_expectation_unitary(rho: np.ndarray) -> np.ndarray:
    """A unitary U with Tr(rho U) = 0 for a density matrix rho (dim >= 2).

    Pairs eigenvectors of rho in non-increasing eigenvalue order and swaps
    each pair.  In odd dimension the leading three eigenvectors get a
    2x2 block [[a, conj(b)], [b, -conj(a)]] plus a phase on the third,
    tuned so that a rho_0 - conj(a) rho_1 + e^{i phi} rho_2 = 0.
    Degenerate eigenvalues keep LAPACK's ordering, so U is not unique.
    """
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    if rho.ndim != 2 or rho.shape[1] != n:
        raise DomainError("rho must be a square matrix")
    if n < 2:
        raise DomainError("need dimension >= 2 for a zero-expectation unitary")
    w, V = np.linalg.eigh((rho + rho.conj().T) / 2)
    order = np.argsort(-w, kind="stable")
    w, V = np.clip(w[order], 0.0, None), V[:, order]
    K = np.zeros((n, n), dtype=complex)
    start = 0
    if n % 2:
        r0, r1, r2 = w[0], w[1], w[2]
        if r2 <= r0 - r1:
            # real a, phi = pi:  a (r0 - r1) = r2
            a = r2 / (r0 - r1) if r0 > r1 else 0.0
            phase = -1.0
        else:
            # purely imaginary a, phi = pi/2:  i y (r0 + r1) = -i r2
            a = -1j * r2 / (r0 + r1)
            phase = 1j
        b = np.sqrt(max(0.0, 1.0 - abs(a) ** 2))
        K[0, 0] = a
        K[1, 1] = -np.conj(a)
        K[1, 0] = b
        K[0, 1] = np.conj(b)
        K[2, 2] = phase
        start = 3
    for i in range(start, n - 1, 2):
        K[i, i + 1] = 1.0
        K[i + 1, i] = 1.0
    return V @ K @ V.conj().T
