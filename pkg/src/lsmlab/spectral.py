"""Diagonalization, ground state and gap, time evolution, E0 surfaces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .algebra import embed_matrix, partial_trace, zero_expectation_unitary
from .errors import BoundViolation, DomainError, LSMConditionError, NumericError, UsageError

DENSE_MAX_DIM = 8192


def degeneracy_tolerance(E0: float) -> float:
    return 1e-9 * max(1.0, abs(E0))


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigenpairs in ascending order; ``states[:, k]`` belongs to ``energies[k]``."""

    energies: np.ndarray
    states: np.ndarray
    backend: str
    tol: float
    complete: bool

    @property
    def E0(self) -> float:
        return float(self.energies[0])

    @property
    def psi0(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    def projector(self, k: int = 0) -> np.ndarray:
        v = self.states[:, k]
        return np.outer(v, v.conj())

    def to_eigenbasis(self, X) -> np.ndarray:
        X = X.toarray() if sp.issparse(X) else np.asarray(X)
        V = self.states
        return V.conj().T @ X @ V

    def from_eigenbasis(self, Y: np.ndarray) -> np.ndarray:
        V = self.states
        return V @ Y @ V.conj().T


def fix_phases(V: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude amplitude of each column real positive."""
    V = np.array(V, dtype=complex)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    ph = V[idx, np.arange(V.shape[1])]
    return V * (np.abs(ph) / ph)[None, :]


def _check_hermitian(H) -> None:
    if sp.issparse(H):
        d = abs(H - H.conj().T)
        resid = d.max() if d.nnz else 0.0
        scale = abs(H).max() if H.nnz else 0.0
    else:
        resid = np.abs(H - H.conj().T).max(initial=0.0)
        scale = np.abs(H).max(initial=0.0)
    if resid > 1e-10 * max(scale, 1e-300):
        raise NumericError(f"matrix is not hermitian: max |H - H^*| = {resid:.3e}")


def diagonalize(
    H,
    backend: str = "auto",
    k: int = 6,
    sectors: np.ndarray | None = None,
    dense_max_dim: int = DENSE_MAX_DIM,
    tol: float = 1e-12,
) -> SpectralData:
    """Eigen-decomposition of a hermitian matrix.

    Parameters
    ----------
    backend : {"auto", "dense", "krylov"}
        ``dense`` returns the full spectrum. ``krylov`` returns the lowest
        ``k`` pairs from ARPACK.  ``auto`` is dense up to ``dense_max_dim``.
    sectors : array, optional
        Diagonal of a conserved operator (e.g. total S3).  The dense backend
        then diagonalizes each block separately.
    """
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DomainError("H must be square")
    _check_hermitian(H)
    D = H.shape[0]
    if backend == "auto":
        backend = "dense" if D <= dense_max_dim else "krylov"
    if backend == "dense":
        if D > dense_max_dim:
            raise UsageError(f"dimension {D} exceeds dense limit {dense_max_dim}")
        Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
        if sectors is None:
            E, V = np.linalg.eigh(Hd)
        else:
            E, V = _blocked_eigh(Hd, np.asarray(sectors))
        return SpectralData(E, fix_phases(V), "dense", tol, True)
    if backend == "krylov":
        k = min(k, D - 2)
        # deterministic start vector
        v0 = np.ones(D) / np.sqrt(D) + 1e-3 * np.cos(np.arange(D))
        try:
            E, V = eigsh(sp.csr_matrix(H), k=k, which="SA", tol=tol, v0=v0, maxiter=50 * D)
        except ArpackNoConvergence as exc:
            raise NumericError(
                f"Lanczos did not converge: {len(exc.eigenvalues)} of {k} pairs after {50 * D} iterations"
            ) from exc
        order = np.argsort(E, kind="stable")
        return SpectralData(E[order], fix_phases(V[:, order]), "krylov", tol, False)
    raise UsageError(f"unknown backend {backend!r}")


def _blocked_eigh(Hd: np.ndarray, sectors: np.ndarray):
    D = Hd.shape[0]
    labels = np.round(sectors * 2).astype(np.int64)
    leak = np.abs(Hd[labels[:, None] != labels[None, :]]).max(initial=0.0)
    if leak > 1e-12 * max(1.0, np.abs(Hd).max()):
        raise NumericError(f"sector labels are not conserved (leak {leak:.3e})")
    E = np.empty(D)
    V = np.zeros((D, D), dtype=complex)
    col = 0
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        e, v = np.linalg.eigh(Hd[np.ix_(idx, idx)])
        n = len(idx)
        E[col:col + n] = e
        V[idx, col:col + n] = v
        col += n
    order = np.argsort(E, kind="stable")
    return E[order], V[:, order]


@dataclass(frozen=True)
class GapReport:
    E0: float
    gap: float
    degenerate: bool
    translation_eigenvalue_phase: float
    translation_eigenvalue: complex

    def require_unique(self):
        if self.degenerate:
            raise LSMConditionError("LSM5", f"ground state is degenerate (E1 - E0 = {self.gap:.3e})")
        return self


def ground_and_gap(spec: SpectralData, T=None, require_unique: bool = False) -> GapReport:
    """E0, gap and the phase-normalized translation eigenvalue of psi0.

    LSM5 allows replacing T by exp(-i phi) T, so the normalized eigenvalue
    exp(-i phi) <psi0, T psi0> is 1 whenever psi0 is a T-eigenvector.
    """
    E = spec.energies
    if len(E) < 2:
        raise DomainError("need at least two eigenvalues for a gap")
    E0 = float(E[0])
    gap = float(E[1] - E[0])
    degenerate = gap <= degeneracy_tolerance(E0)
    phi, lam = 0.0, 1.0 + 0j
    if T is not None:
        psi = spec.psi0
        ev = complex(np.vdot(psi, T @ psi))
        phi = float(np.angle(ev))
        lam = ev * np.exp(-1j * phi)
    rep = GapReport(E0, max(gap, 0.0), bool(degenerate), phi, lam)
    return rep.require_unique() if require_unique else rep


def evolve(spec: SpectralData, X, t: float, imaginary: bool = False):
    """Heisenberg evolution of an operator or Schroedinger evolution of a vector.

    Operators: alpha_t(A) = e^{itH} A e^{-itH}; with ``imaginary`` the result
    is alpha_{it}(A) = e^{-t(H-E0)} A e^{t(H-E0)}.
    Vectors: e^{-itH} psi, or e^{-t(H-E0)} psi with ``imaginary``.
    """
    V, E = spec.states, spec.energies - spec.E0
    X = X.toarray() if sp.issparse(X) else np.asarray(X, dtype=complex)
    if X.ndim == 1:
        c = V.conj().T @ X
        if not spec.complete:
            resid = np.linalg.norm(X - V @ c)
            if resid > 1e-8 * max(1.0, np.linalg.norm(X)):
                raise NumericError(f"vector not in span of computed eigenstates (residual {resid:.3e})")
        w = np.exp(-t * E) if imaginary else np.exp(-1j * t * spec.energies)
        return V @ (w * c)
    if not spec.complete:
        raise UsageError("operator evolution needs the full spectrum")
    Y = V.conj().T @ X @ V
    if imaginary:
        expo = t * (E[None, :] - E[:, None])
        if expo.max(initial=0.0) > 700:
            raise NumericError("imaginary-time weights overflow")
        Y = Y * np.exp(expo)
    else:
        ph = np.exp(1j * t * spec.energies)
        Y = ph[:, None] * Y * ph.conj()[None, :]
    return V @ Y @ V.conj().T


def lowest_energies(H, n: int = 2, dense_max_dim: int = DENSE_MAX_DIM) -> np.ndarray:
    D = H.shape[0]
    if D <= dense_max_dim:
        Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
        return np.linalg.eigvalsh(Hd)[:n]
    return diagonalize(H, "krylov", k=max(n, 4)).energies[:n]


@dataclass(frozen=True)
class EnergySurface:
    thetas: np.ndarray
    theta_primes: np.ndarray
    table: np.ndarray
    line_thetas: np.ndarray
    line_E0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    h: float


def energy_surface(
    builder: Callable[[float, float], "sp.spmatrix"],
    thetas: Sequence[float],
    theta_primes: Sequence[float] = (),
    line: Sequence[float] | None = None,
    h: float = 1e-4,
) -> EnergySurface:
    """E0(theta, theta') on a grid, plus central differences on theta' = -theta.

    ``builder(theta, theta_prime)`` returns H_{theta,theta'}.
    """
    thetas = np.asarray(thetas, dtype=float)
    theta_primes = np.asarray(theta_primes, dtype=float)
    table = np.array([[lowest_energies(builder(a, b), 1)[0] for b in theta_primes] for a in thetas])
    line = thetas if line is None else np.asarray(line, dtype=float)
    E_line, d1, d2 = [], [], []
    for th in line:
        E = lowest_energies(builder(th, -th), 2)
        if E[1] - E[0] <= degeneracy_tolerance(E[0]):
            raise LSMConditionError("LSM5", f"degenerate ground state at theta = {th!r}")
        E_line.append(E[0])
        e = lambda a, b: lowest_energies(builder(a, b), 1)[0]
        d1.append((e(th + h, -th) - e(th - h, -th)) / (2 * h))
        d2.append((e(th, -th + h) - e(th, -th - h)) / (2 * h))
    return EnergySurface(thetas, theta_primes, table, line, np.array(E_line), np.array(d1), np.array(d2), h)


@dataclass(frozen=True)
class SimpleGapBound:
    value: float
    overlap: float
    site: int
    trial: np.ndarray


def simple_gap_bound(H, spec: SpectralData, dims: Sequence[int], site: int = 0, one_norm: float | None = None) -> SimpleGapBound:
    """Variational energy of U psi0 with U a zero-expectation one-site unitary.

    If ``one_norm`` (|||Phi|||_1) is given, the bound 2 |||Phi|||_1 is enforced.
    """
    psi = spec.psi0
    rho = partial_trace(psi, [site], dims)
    U = embed_matrix([site], zero_expectation_unitary(rho), dims)
    phi = U @ psi
    Hphi = H @ phi
    val = float(np.real(np.vdot(phi, Hphi))) - spec.E0
    ov = abs(complex(np.vdot(psi, phi)))
    if one_norm is not None and val > 2 * one_norm + 1e-9:
        raise BoundViolation(f"simple gap bound {val} exceeds 2|||Phi|||_1 = {2 * one_norm}")
    return SimpleGapBound(val, ov, site, phi)
