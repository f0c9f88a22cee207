"""B_{a,T}(A, H) by two independent routes, and B(A, H) on the ground state.

Spectral route: in the eigenbasis of H,

    [int_0^T A_a(it) dt]_{mn} = A_{mn} F_{a,T}(E_n - E_m),

and B_{a,T} = -int_0^T (A_a(it) - A_a(it)^*) dt.

Quadrature route: integrating the t-variable of the Cauchy kernel first,
with A = Ah + i Aa split into hermitian parts,

    B_{a,T} = (i/pi) int_0^inf e^{-a s^2} [ K(s) (alpha_s - alpha_{-s})(Ah)
                                           - J(s) (alpha_s + alpha_{-s})(Aa) ] ds,

    K(s) = int_0^T s e^{-a t^2} / (s^2 + t^2) dt,
    J(s) = int_0^T t e^{-a t^2} / (s^2 + t^2) dt,

truncated at |s| <= M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from ..algebra import LocalOperator, embed_matrix
from ..errors import DomainError, PreconditionError, UsageError
from ..spectral import SpectralData
from .weights import FilterParams, gl_panels, truncation_cutoff, weight_table


def _as_dense(A, dims=None) -> np.ndarray:
    if isinstance(A, LocalOperator):
        if dims is None:
            raise UsageError("embedding a LocalOperator needs the site dimensions")
        A = embed_matrix(A.sites, A.matrix, dims)
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=complex)


def _antihermitize(B: np.ndarray, info: dict | None) -> np.ndarray:
    S = 0.5 * (B - B.conj().T)
    if info is not None:
        nB = np.linalg.norm(B, 2)
        info["antihermitian_residual"] = float(np.linalg.norm(B + B.conj().T, 2) / nB) if nB else 0.0
    return S


def b_filtered_eigenbasis(Ae: np.ndarray, E: np.ndarray, params: FilterParams, panels: int | None = None, kernel: str | None = None) -> np.ndarray:
    """B_{a,T} expressed in the eigenbasis, given A in the same basis."""
    omega = E[None, :] - E[:, None]  # E_n - E_m
    mask = (Ae != 0) | (Ae.T != 0)
    Fw = np.zeros(omega.shape)
    if mask.any():
        Fw[mask] = weight_table(omega[mask], params, panels=panels, kernel=kernel)
    return -(Ae * Fw - Ae.conj().T * Fw.T)


def b_filtered(
    A,
    H,
    params: FilterParams,
    backend: str = "spectral",
    spec: SpectralData | None = None,
    dims=None,
    panels: int | None = None,
    info: dict | None = None,
) -> np.ndarray:
    """Dense B_{a,T}(A, H), anti-hermitized; ``info`` receives the raw residual.

    The spectral backend needs complete spectral data of H.  The quadrature
    backend uses H only (matrix exponentials), or the eigenbasis of ``spec``
    when given.
    """
    A = _as_dense(A, dims)
    if backend == "spectral":
        if spec is None or not spec.complete:
            raise UsageError("spectral backend needs the full spectrum of H")
        Be = b_filtered_eigenbasis(spec.to_eigenbasis(A), spec.energies, params, panels)
        B = spec.from_eigenbasis(Be)
    elif backend == "quadrature":
        B = _b_quadrature(A, H, params, spec, panels)
    else:
        raise UsageError(f"unknown filter backend {backend!r}")
    return _antihermitize(B, info)


def b_filtered_on_ground(A, spec: SpectralData, params: FilterParams, dims=None, panels: int | None = None,
                         kernel: str | None = None) -> np.ndarray:
    """B_{a,T}(A, H) psi0 from the first eigenbasis column only.

    Matches ``b_filtered(...) @ psi0`` up to the anti-hermitization, which
    is exact for this formula.
    """
    if not spec.complete:
        raise UsageError("spectral backend needs the full spectrum of H")
    A = _as_dense(A, dims)
    V, E = spec.states, spec.energies
    psi = spec.psi0
    col = V.conj().T @ (A @ psi)  # A_{m0}
    row = (psi.conj() @ A) @ V  # A_{0m}
    dE = E - E[0]
    Fw = weight_table(np.concatenate([-dE, dE]), params, panels=panels, kernel=kernel)
    n = len(E)
    # B_{m0} = -(A_{m0} F(E0 - E_m) - conj(A_{0m}) F(E_m - E0))
    coef = -(col * Fw[:n] - row.conj() * Fw[n:])
    return V @ coef


def _spectral_width(H, spec: SpectralData | None) -> float:
    if spec is not None and spec.complete:
        return float(spec.energies[-1] - spec.energies[0])
    Hs = sp.csr_matrix(H)
    # Gershgorin bound on the spectral radius, doubled for differences
    return 2.0 * float(abs(Hs).sum(axis=1).max())


def _kernels(s: np.ndarray, params: FilterParams, order: int = 16):
    """K(s) and J(s) with the small-s singular parts taken out analytically."""
    a, T = params.a, params.T
    t, w = gl_panels(0.0, T, max(8, math.ceil(T * math.sqrt(a))), order, grade=30)
    g = np.expm1(-a * t * t)  # e^{-a t^2} - 1, smooth and O(t^2)
    den = s[:, None] ** 2 + t[None, :] ** 2
    K = np.arctan2(T, s) + s * ((g[None, :] / den) @ w)
    with np.errstate(divide="ignore"):
        J = 0.5 * np.log1p((T / s) ** 2) + (t * g)[None, :] / den @ w
    return K, J


def cauchy_kernels(s, params: FilterParams):
    """Public access to (K(s), J(s)) for testing."""
    return _kernels(np.atleast_1d(np.asarray(s, dtype=float)), params)


def _s_nodes(params: FilterParams, M: float, width: float, panels: int | None, singular: bool):
    n = panels if panels is not None else max(8, math.ceil(M * max(width, 1.0) / 2.0))
    return gl_panels(0.0, M, n, 16, grade=30 if singular else 0)


def _b_quadrature(A: np.ndarray, H, params: FilterParams, spec: SpectralData | None, panels: int | None) -> np.ndarray:
    Ah = 0.5 * (A + A.conj().T)
    Aa = (A - A.conj().T) / 2j
    has_aa = np.abs(Aa).max(initial=0.0) > 0.0
    normA = float(np.linalg.norm(A, 2))
    M = params.M if params.M is not None else truncation_cutoff(params, normA)
    s, w = _s_nodes(params, M, _spectral_width(H, spec), panels, has_aa)
    K, J = _kernels(s, params)
    weight = w * np.exp(-params.a * s * s)
    use_eigen = spec is not None and spec.complete
    if use_eigen:
        E = spec.energies
        Ahe, Aae = spec.to_eigenbasis(Ah), spec.to_eigenbasis(Aa)
        omega = E[:, None] - E[None, :]  # alpha_s picks e^{i s (E_m - E_n)}
    else:
        Hd = H.toarray() if sp.issparse(H) else np.asarray(H, dtype=complex)
    acc = np.zeros(A.shape, dtype=complex)
    for sj, wj, Kj, Jj in zip(s, weight, K, J):
        if use_eigen:
            ph = np.exp(1j * sj * omega)
            term = Kj * (2j * ph.imag) * Ahe
            if has_aa:
                term -= Jj * (2 * ph.real) * Aae
        else:
            U = expm(-1j * sj * Hd)  # e^{-isH}
            Ud = U.conj().T
            term = Kj * (Ud @ Ah @ U - U @ Ah @ Ud)
            if has_aa:
                term -= Jj * (Ud @ Aa @ U + U @ Aa @ Ud)
        acc += wj * term
    B = (1j / math.pi) * acc
    return spec.from_eigenbasis(B) if use_eigen else B


def b_apply_quadrature(A, H, params: FilterParams, psi: np.ndarray, dims=None, panels: int | None = None) -> np.ndarray:
    """B_{a,T}(A, H) psi using only sparse products (Krylov exponentials)."""
    if isinstance(A, LocalOperator):
        if dims is None:
            raise UsageError("embedding a LocalOperator needs the site dimensions")
        A = embed_matrix(A.sites, A.matrix, dims)
    A = sp.csr_matrix(A, dtype=complex)
    H = sp.csr_matrix(H)
    Ah = 0.5 * (A + A.conj().T)
    Aa = (A - A.conj().T) / 2j
    has_aa = abs(Aa).max() > 0 if Aa.nnz else False
    normA = float(sp.linalg.norm(A, 1))  # >= operator norm bound is fine for the cutoff
    M = params.M if params.M is not None else truncation_cutoff(params, normA)
    s, w = _s_nodes(params, M, _spectral_width(H, None), panels, has_aa)
    K, J = _kernels(s, params)
    weight = w * np.exp(-params.a * s * s)
    psi = np.asarray(psi, dtype=complex)
    out = np.zeros_like(psi)

    def alpha(X, sj, v):
        # e^{isH} X e^{-isH} v
        u = expm_multiply(-1j * sj * H, v)
        return expm_multiply(1j * sj * H, X @ u)

    for sj, wj, Kj, Jj in zip(s, weight, K, J):
        term = Kj * (alpha(Ah, sj, psi) - alpha(Ah, -sj, psi))
        if has_aa:
            term -= Jj * (alpha(Aa, sj, psi) + alpha(Aa, -sj, psi))
        out += wj * term
    return (1j / math.pi) * out


@dataclass(frozen=True, eq=False)
class ExactGroundB:
    """B(A, H) psi0 and the corresponding operator B(A, H) P0."""

    vector: np.ndarray
    psi0: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.outer(self.vector, self.psi0.conj())


def b_exact_on_ground(A, spec: SpectralData, dims=None, tol: float = 1e-10) -> ExactGroundB:
    """B(A, H) psi0 = -sum_{k>0} psi_k A_{k0} / (E_k - E0), needing P0 A P0 = 0."""
    if not spec.complete:
        raise UsageError("exact ground-state B needs the full spectrum")
    A = _as_dense(A, dims)
    V, E = spec.states, spec.energies
    col = V.conj().T @ (A @ spec.psi0)
    normA = float(np.linalg.norm(A, 2)) if A.size else 0.0
    if abs(col[0]) > tol * max(1.0, normA):
        raise PreconditionError(f"P0 A P0 != 0: |<psi0, A psi0>| = {abs(col[0]):.3e}")
    dE = E - E[0]
    gap_tol = 1e-9 * max(1.0, abs(E[0]))
    near = (dE <= gap_tol)
    near[0] = False
    if np.any(np.abs(col[near]) > tol * max(1.0, normA)):
        raise PreconditionError("A couples psi0 to a degenerate ground state")
    coef = np.zeros_like(col)
    far = dE > gap_tol
    coef[far] = -col[far] / dE[far]
    return ExactGroundB(V @ coef, spec.psi0)
