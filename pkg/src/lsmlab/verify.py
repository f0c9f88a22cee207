"""Numerical checks of the locality and gap inequalities.

Every check returns a :class:`BoundReport` holding lhs and rhs on a sample
grid.  A report passes when min(rhs - lhs) >= -1e-9 * scale, with
scale = max(1, max |lhs|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .algebra import LocalOperator, embed_matrix
from .errors import DomainError, PreconditionError
from .filter import (
    FilterParams,
    b_exact_on_ground,
    b_filtered,
    b_filtered_on_ground,
    envelope_cutoff,
    filter_weight,
    truncation_bound,
)
from .lattice import DecayFunction, Lattice, decay_constants, interaction_norms
from .spectral import SpectralData, diagonalize, evolve

REL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BoundReport:
    name: str
    grid: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def worst_margin(self) -> float:
        if len(self.grid) == 0:
            return math.inf
        return float(np.min(self.rhs - self.lhs))

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -REL_TOL * self.scale

    def summary(self) -> dict:
        return {"name": self.name, "points": int(len(self.grid)), "worst_margin": self.worst_margin,
                "passed": self.passed, **{k: v for k, v in self.meta.items() if np.isscalar(v)}}


def _report(name, grid, lhs, rhs, **meta) -> BoundReport:
    grid, lhs, rhs = (np.asarray(x, dtype=float) for x in (grid, lhs, rhs))
    # tolerance tracks the measured side; envelopes can be astronomically loose
    scale = max(1.0, float(np.max(np.abs(lhs), initial=0.0)))
    return BoundReport(name, grid, lhs, rhs, scale, meta)


def _norm(M) -> float:
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


def _full(op: LocalOperator, lattice: Lattice) -> np.ndarray:
    return embed_matrix(op.sites, op.matrix, lattice.site_dims()).toarray()


def support_distance(lattice: Lattice, X, Y) -> float:
    D = lattice.distances
    return float(min(D[x, y] for x in X for y in Y))


# -- Lieb-Robinson -------------------------------------------------------------


def lieb_robinson_check(
    interaction,
    A: LocalOperator,
    B: LocalOperator,
    F: DecayFunction,
    ts: Sequence[float],
    spec: SpectralData | None = None,
    H=None,
) -> BoundReport:
    """||[alpha_t(A), B]|| against 2||A|| ||B|| / C_lam * g_lam(t) * sum F_lam(d(x,y))."""
    lat = interaction.lattice
    if spec is None:
        from .model import build_hamiltonian

        H = build_hamiltonian(interaction) if H is None else H
        spec = diagonalize(H, "dense")
    phi_lam, _, _ = interaction_norms(lat, interaction, F)
    _, C = decay_constants(lat, F)
    Am, Bm = _full(A, lat), _full(B, lat)
    nA, nB = A.norm, B.norm
    dXY = support_distance(lat, A.sites, B.sites)
    Fsum = float(sum(F(lat.distances[x, y]) for x in A.sites for y in B.sites))
    ts = np.asarray(ts, dtype=float)
    lhs, rhs = [], []
    for t in ts:
        At = evolve(spec, Am, t)
        lhs.append(_norm(At @ Bm - Bm @ At))
        g = math.exp(2 * phi_lam * C * abs(t))
        g = g - 1.0 if dXY > 0 else g
        rhs.append(2 * nA * nB / C * g * Fsum)
    return _report("lieb_robinson", ts, lhs, rhs, distance=dXY, phi_lambda=phi_lam, C_lambda=C, lam=F.lam,
                   trivial_cap=2 * nA * nB)


# -- restricted dynamics ---------------------------------------------------------


def restriction_dynamics_check(H0, H2, A, ts: Sequence[float], epsrel: float = 1e-10) -> BoundReport:
    """||alpha^0_t(A) - alpha^1_t(A)|| <= int_0^|t| ||[H2, alpha^1_s(A)]|| ds with H1 = H0 - H2."""
    H0d = H0.toarray() if sp.issparse(H0) else np.asarray(H0, dtype=complex)
    H2d = H2.toarray() if sp.issparse(H2) else np.asarray(H2, dtype=complex)
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=complex)
    s0 = diagonalize(H0d, "dense")
    s1 = diagonalize(H0d - H2d, "dense")
    comm = _commutator_norm(s1, H2d, Ad)
    ts = np.asarray(ts, dtype=float)
    lhs, rhs = [], []
    for t in ts:
        lhs.append(_norm(evolve(s0, Ad, t) - evolve(s1, Ad, t)))
        if t == 0:
            rhs.append(0.0)
        else:
            val, _ = integrate.quad(comm, 0.0, abs(t), epsabs=1e-14, epsrel=epsrel, limit=200)
            rhs.append(val)
    return _report("restricted_dynamics", ts, lhs, rhs)


def _commutator_norm(s1: SpectralData, H2: np.ndarray, A: np.ndarray) -> Callable[[float], float]:
    H2e = s1.to_eigenbasis(H2)
    Ae = s1.to_eigenbasis(A)
    E = s1.energies

    def f(t):
        ph = np.exp(1j * t * E)
        At = ph[:, None] * Ae * ph.conj()[None, :]
        return _norm(H2e @ At - At @ H2e)

    return f


@dataclass(frozen=True)
class Envelope:
    c1: float
    c2: float
    c3: float
    M: float
    grid: np.ndarray
    samples: np.ndarray


def fit_envelope(H0, H2, A, a: float, c3: float, points: int = 200, t_max: float | None = None) -> Envelope:
    """Upper envelope c1 e^{c2 |t| - c3} for ||[H2, alpha^1_t(A)]|| on [0, M].

    Log-space least squares gives c2; c1 is then raised until the envelope
    majorizes every sample.  M solves a M^2 + c2 M - c3 = 0, and the sample
    range is extended until it covers [0, M].
    """
    H0d = H0.toarray() if sp.issparse(H0) else np.asarray(H0, dtype=complex)
    H2d = H2.toarray() if sp.issparse(H2) else np.asarray(H2, dtype=complex)
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=complex)
    s1 = diagonalize(H0d - H2d, "dense")
    comm = _commutator_norm(s1, H2d, Ad)
    t_max = t_max or math.sqrt(c3 / a)
    for _ in range(20):
        grid = np.linspace(0.0, t_max, points)
        h = np.array([comm(t) for t in grid])
        pos = h > 1e-300
        if pos.sum() >= 2:
            c2, _ = np.polyfit(grid[pos], np.log(h[pos]), 1)
        else:
            c2 = 0.0
        c2 = max(float(c2), 1e-3)
        M = envelope_cutoff(a, c2, c3)
        if M <= t_max:
            break
        t_max = 1.25 * M
    # sample-wise majorization, with a margin for the gaps between samples
    c1 = float(np.max(h * np.exp(-c2 * grid + c3))) * 1.05
    c1 = max(c1, 1e-300)
    return Envelope(c1, c2, c3, M, grid, h)


def decoupling_check(H0, H2, A, params: FilterParams, c3: float, envelope: Envelope | None = None,
                     panels: int | None = None) -> BoundReport:
    """||B_{a,T}(A,H0) - B_{a,T}(A,H1)|| <= (2T/M) e^{-aM^2} (||A||/sqrt(pi a) + c1 M^2/pi)."""
    env = envelope or fit_envelope(H0, H2, A, params.a, c3)
    H0d = H0.toarray() if sp.issparse(H0) else np.asarray(H0, dtype=complex)
    H1d = H0d - (H2.toarray() if sp.issparse(H2) else np.asarray(H2, dtype=complex))
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=complex)
    s0, s1 = diagonalize(H0d, "dense"), diagonalize(H1d, "dense")
    B0 = b_filtered(Ad, H0d, params, "spectral", spec=s0, panels=panels)
    B1 = b_filtered(Ad, H1d, params, "spectral", spec=s1, panels=panels)
    lhs = _norm(B0 - B1)
    a, T, M = params.a, params.T, env.M
    rhs = 2 * T / M * math.exp(-a * M * M) * (_norm(Ad) / math.sqrt(math.pi * a) + env.c1 * M * M / math.pi)
    return _report("b_decoupling", [0.0], [lhs], [rhs], c1=env.c1, c2=env.c2, c3=env.c3, M=M)


# -- exponential clustering ----------------------------------------------------------


def clustering_constants(interaction, F: DecayFunction, gap: float, X, Y):
    """(mu, d, C(A,B)/(||A|| ||B||), t_max) for supports X and Y."""
    lat = interaction.lattice
    phi_lam, _, _ = interaction_norms(lat, interaction, F)
    _, C = decay_constants(lat, F)
    lam = F.lam
    if not lam > 0:
        raise DomainError("clustering needs lambda > 0")
    d = support_distance(lat, X, Y)
    if not d > 0:
        raise DomainError("clustering needs disjoint supports at positive distance")
    mu = lam * gap / (4 * phi_lam * C + gap)
    F0 = F.unweighted  # C(A,B) uses F as printed
    Fsum = float(sum(F0(lat.distances[x, y]) for x in X for y in Y))
    cab = 1.0 + 2.0 / (math.pi * C) * Fsum + 1.0 / math.sqrt(math.pi * mu * d)
    t_max = 2 * lam * d / (4 * phi_lam * C + gap)
    return mu, d, cab, t_max


def clustering_check(
    interaction,
    spec: SpectralData,
    A: LocalOperator,
    B: LocalOperator,
    F: DecayFunction,
    points: int = 41,
    project: bool = True,
) -> list[BoundReport]:
    """Exponential clustering on the admissible window, plus both integral corollaries.

    B is replaced by B - <B> when ``project`` is set, which keeps it local
    and gives P0 B Omega = P0 B^* Omega = 0.
    """
    lat = interaction.lattice
    gap = float(spec.energies[1] - spec.energies[0])
    Am, Bm = _full(A, lat), _full(B, lat)
    psi = spec.psi0
    if project:
        Bm = Bm - np.vdot(psi, Bm @ psi) * np.eye(Bm.shape[0])
    resid = max(abs(np.vdot(psi, Bm @ psi)), abs(np.vdot(psi, Bm.conj().T @ psi)))
    if resid > 1e-10 * max(1.0, _norm(Bm)):
        raise PreconditionError(f"P0 B Omega != 0 (residual {resid:.3e})")
    nA, nB = _norm(Am), _norm(Bm)
    mu, d, cab, t_max = clustering_constants(interaction, F, gap, A.sites, B.sites)
    CAB = cab * nA * nB
    f = imaginary_time_correlation(spec, Am, Bm)
    ts = np.linspace(0.0, t_max, points) if t_max > 0 else np.array([])
    lhs = [f(t) for t in ts]
    rhs = [CAB * math.exp(-mu * d * (1 + gap ** 2 * t ** 2 / (4 * mu ** 2 * d ** 2))) for t in ts]
    point = _report("clustering", ts, lhs, rhs, mu=mu, d=d, C_AB=CAB, t_max=t_max, empty=len(ts) == 0)

    I1, I2, spectral_sum = clustering_integrals(spec, Am, Bm)
    r1 = (2 * mu * d * CAB + nA * nB * math.exp(-mu * d)) * math.exp(-mu * d) / gap
    r2 = ((mu * d) ** 2 * CAB + nA * nB * (2 * mu * d + math.exp(-mu * d))) * math.exp(-mu * d) / gap ** 2
    ints = _report("clustering_integrals", [1.0, 2.0], [I1, I2], [r1, r2], spectral_sum=spectral_sum,
                   single_integral=I1, double_integral=I2)
    return [point, ints]


def imaginary_time_correlation(spec: SpectralData, A: np.ndarray, B: np.ndarray) -> Callable[[float], float]:
    """t -> |<Omega, A alpha_{it}(B) Omega>| = |sum_k A_0k B_k0 e^{-t (E_k - E0)}|."""
    V, E = spec.states, spec.energies - spec.E0
    psi = spec.psi0
    w = ((psi.conj() @ A) @ V) * (V.conj().T @ (B @ psi))

    def f(t):
        return float(abs(np.sum(w * np.exp(-t * E))))

    f.weights, f.excitations = w, E
    return f


def clustering_integrals(spec: SpectralData, A: np.ndarray, B: np.ndarray):
    """(int_0^inf |f|, int_0^inf u |f(u)| du, sum_k |A_0k B_k0| / (E_k - E0)) for the correlation f.

    The double integral over s, t >= 0 of |f(s + t)| equals the weighted
    single integral.  The spectral sum majorizes the first integral, with
    equality when every A_0k B_k0 is nonnegative.
    """
    f = imaginary_time_correlation(spec, A, B)
    w, E = f.weights, f.excitations
    I1, _ = integrate.quad(f, 0.0, np.inf, epsabs=1e-15, epsrel=1e-11, limit=400)
    I2, _ = integrate.quad(lambda u: u * f(u), 0.0, np.inf, epsabs=1e-15, epsrel=1e-11, limit=400)
    far = E > 1e-9 * max(1.0, abs(spec.E0))
    return I1, I2, float(np.sum(np.abs(w[far]) / E[far]))


# -- gap lemma --------------------------------------------------------------------------


def gap_lemma_check(spec: SpectralData, A, pairs: Sequence[tuple], panels: int | None = None) -> BoundReport:
    """||(B_{a,T} - B) P0|| against T e^{-g^2/4a} (||A P0|| + ||A^* P0||)/2 + e^{-gT} ||A P0|| / g."""
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=complex)
    gap = float(spec.energies[1] - spec.energies[0])
    psi = spec.psi0
    bexact = b_exact_on_ground(Ad, spec).vector
    nAP, nAsP = float(np.linalg.norm(Ad @ psi)), float(np.linalg.norm(Ad.conj().T @ psi))
    lhs, rhs, grid = [], [], []
    for k, (a, T) in enumerate(pairs):
        if 2 * a * T > gap * (1 + 1e-12):
            raise DomainError(f"pair (a={a}, T={T}) violates 2aT <= gap = {gap}")
        p = FilterParams(a, T)
        b = b_filtered_on_ground(Ad, spec, p, panels=panels)
        lhs.append(float(np.linalg.norm(b - bexact)))
        rhs.append(T * math.exp(-gap ** 2 / (4 * a)) * (nAP + nAsP) / 2 + math.exp(-gap * T) * nAP / gap)
        grid.append(k)
    return _report("gap_lemma", grid, lhs, rhs, gap=gap)


# -- filter function envelopes -----------------------------------------------------------


def filter_envelope_check(grid: Sequence[tuple]) -> list[BoundReport]:
    """F >= 0, F(E) <= (T/2) e^{-E^2/4a} for E >= 0, and the E >= 2aT bound for F(-E)."""
    pos_l, pos_r, up_l, up_r, lo_l, lo_r, idx = [], [], [], [], [], [], []
    for k, (a, T, E) in enumerate(grid):
        p = FilterParams(a, T)
        f = filter_weight(p, E)
        pos_l.append(-f)
        pos_r.append(0.0)
        idx.append(k)
        if E >= 0:
            up_l.append(f)
            up_r.append(T / 2 * math.exp(-E * E / (4 * a)))
        if E >= 2 * a * T > 0:
            lo_l.append(-math.expm1(-E * T) / E - filter_weight(p, -E))
            lo_r.append(T / 2 * math.exp(-E * E / (4 * a)))
    return [
        _report("filter_positivity", idx, pos_l, pos_r),
        _report("filter_upper_envelope", range(len(up_l)), up_l, up_r),
        _report("filter_lower_envelope", range(len(lo_l)), lo_l, lo_r),
    ]


def truncation_check(A, H, params: FilterParams, M: float, spec: SpectralData | None = None) -> BoundReport:
    """Truncating the s-integral at M versus 3M stays within the Prop. bound at M."""
    from .filter.operators import _as_dense

    Ad = _as_dense(A)
    hi = b_filtered(Ad, H, FilterParams(params.a, params.T, 3 * M), "quadrature", spec=spec)
    lo = b_filtered(Ad, H, FilterParams(params.a, params.T, M), "quadrature", spec=spec)
    # ||B_M - B_inf|| <= 2 x bound(M); the 3M reference adds 2 x bound(3M)
    nA = _norm(Ad)
    rhs = 2 * truncation_bound(params, M, nA) + 2 * truncation_bound(params, 3 * M, nA)
    return _report("filter_truncation", [M], [_norm(hi - lo)], [rhs])


def b_norm_check(A, H, params: FilterParams, spec: SpectralData) -> BoundReport:
    """Anti-hermiticity and ||B|| <= (||A||/2) sqrt(pi/a)."""
    info = {}
    B = b_filtered(A, H, params, "spectral", spec=spec, info=info)
    from .filter.operators import _as_dense

    nA = _norm(_as_dense(A))
    return _report("b_norm", [0.0], [_norm(B)], [nA / 2 * math.sqrt(math.pi / params.a)],
                   antihermitian_residual=info["antihermitian_residual"])


# -- norm-preserving flows ---------------------------------------------------------------


def norm_preservation_check(
    generator: Callable[[float], np.ndarray],
    beta: Callable[[float], np.ndarray],
    Y0: np.ndarray,
    theta_max: float = 2 * math.pi,
    steps: int = 512,
) -> BoundReport:
    """||Y(theta) - gamma_theta(Y0)|| <= int_0^theta ||beta|| for dY = G Y + beta, G anti-hermitian."""
    h = theta_max / steps
    X = np.asarray(Y0, dtype=complex).copy()
    Y = X.copy()
    acc = 0.0
    grid, lhs, rhs = [0.0], [0.0], [0.0]
    nb = lambda th: float(np.linalg.norm(beta(th)))
    for k in range(steps):
        th = k * h
        G0, Gm, G1 = generator(th), generator(th + h / 2), generator(th + h)
        b0, bm, b1 = beta(th), beta(th + h / 2), beta(th + h)
        X = _rk4(lambda G, b, v: G @ v, (G0, Gm, G1), (0, 0, 0), X, h)
        Y = _rk4(lambda G, b, v: G @ v + b, (G0, Gm, G1), (b0, bm, b1), Y, h)
        acc += h / 6 * (nb(th) + 4 * nb(th + h / 2) + nb(th + h))
        grid.append(th + h)
        lhs.append(float(np.linalg.norm(Y - X)))
        rhs.append(acc)
    return _report("norm_preserving_flow", grid, lhs, rhs)


def _rk4(f, Gs, bs, v, h):
    k1 = f(Gs[0], bs[0], v)
    k2 = f(Gs[1], bs[1], v + h / 2 * k1)
    k3 = f(Gs[1], bs[1], v + h / 2 * k2)
    k4 = f(Gs[2], bs[2], v + h * k3)
    return v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def tolerance_report(name: str, grid, deviations, tol: float, **meta) -> BoundReport:
    """An identity check phrased as a report: lhs = deviation, rhs = tolerance.

    The tolerance is already the slack, so these reports use scale 0 and
    pass only when every deviation is at most ``tol``.
    """
    dev = np.asarray(deviations, dtype=float)
    rep = _report(name, grid, dev, np.full(dev.shape, tol), tolerance=tol, **meta)
    return replace(rep, scale=0.0)
