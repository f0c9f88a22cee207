"""Hastings' flow for the twisted ground state and the LSM diagnostics.

The flow integrates d psi / d theta = B_{a,T}(theta) psi on [0, 2 pi] with
B_{a,T}(theta) = B_{a,T}(A_1(theta), H_{theta,-theta}) and psi(0) = psi0.

Two ways of producing B_{a,T}(theta) at a stage point are offered:

``rotate`` (default)
    H_{theta,-theta} = W(theta) H W(theta)^* and W(theta)^* A_1(theta) W(theta)
    = A_1(0), hence B_{a,T}(theta) = W(theta) B_{a,T}(0) W(theta)^* exactly.
    B_{a,T}(0) is built once and rotated at every stage.
``rebuild``
    H_{theta,-theta} is re-diagonalized, A_1(theta) re-derived and B_{a,T}
    reassembled at every stage.  Used to validate ``rotate`` on small systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .algebra import embed, partial_trace, s3_diagonal, trace_norm, translation_operator
from .errors import DomainError, LSMConditionError, NumericError, PreconditionError
from .filter import FilterParams, b_exact_on_ground, b_filtered
from .model import (
    Interaction,
    TwistConfig,
    build_hamiltonian,
    require_lsm,
    twist_derivative,
    twisted_hamiltonian,
    twisted_translation,
    window_columns,
    window_rotation,
)
from .spectral import SpectralData, diagonalize, ground_and_gap


@dataclass(frozen=True)
class FlowConfig:
    theta_steps: int = 512
    renormalize: bool = False
    filter_backend: str = "spectral"
    mode: str = "rotate"
    generator: str = "filtered"
    m: int | None = None
    record_every: int = 1
    keep_states: bool = False
    panels: int | None = None

    def __post_init__(self):
        if self.theta_steps < 64:
            raise DomainError(f"theta_steps must be >= 64, got {self.theta_steps}")
        if self.mode not in ("rotate", "rebuild"):
            raise DomainError(f"unknown flow mode {self.mode!r}")
        if self.generator not in ("filtered", "exact"):
            raise DomainError(f"unknown generator {self.generator!r}")
        if self.filter_backend not in ("spectral", "quadrature"):
            raise DomainError(f"unknown filter backend {self.filter_backend!r}")

    @property
    def step(self) -> float:
        return 2 * math.pi / self.theta_steps


@dataclass(frozen=True, eq=False)
class FlowResult:
    psi_final: np.ndarray
    thetas: np.ndarray
    norms: np.ndarray
    energies: np.ndarray
    overlaps: np.ndarray
    trace_distances: np.ndarray
    d1_norms: np.ndarray
    d1_d2: np.ndarray
    params: FilterParams
    config: FlowConfig
    m: int
    E0: float
    gap: float
    antihermitian_residual: float
    norm_drift: float
    states: list = field(default_factory=list)


class _Setup:
    """Everything the flow and its diagnostics need at theta = 0."""

    def __init__(self, interaction: Interaction, m: int | None, H=None, spec=None, dense_max_dim: int = 8192):
        lat = interaction.lattice
        self.interaction, self.lattice = interaction, lat
        self.H = build_hamiltonian(interaction) if H is None else sp.csr_matrix(H)
        require_lsm(interaction, self.H)
        self.dims = lat.site_dims()
        self.total_s3 = s3_diagonal(lat, range(lat.n_sites))
        if spec is None:
            spec = diagonalize(self.H, "dense", sectors=self.total_s3, dense_max_dim=dense_max_dim)
        self.spec = spec
        self.T = translation_operator(lat)
        self.gap_report = ground_and_gap(spec, self.T, require_unique=True)
        psi0 = spec.psi0
        s3 = float(np.real(np.vdot(psi0, self.total_s3 * psi0)))
        spread = float(np.real(np.vdot(psi0, self.total_s3 ** 2 * psi0))) - s3 ** 2
        if abs(s3) > 1e-9 or spread > 1e-9:
            raise LSMConditionError("LSM5", "ground state is not invariant under the S3 rotations")
        self.cfg0 = TwistConfig(0.0, 0.0, m).resolve(interaction)
        self.m = self.cfg0.m
        L = lat.L
        self.S_W = -sum(s3_diagonal(lat, lat.column_sites(n)) for n in range(self.m + 1, self.m + L // 2 + 1))
        A1, A2 = twist_derivative(interaction, self.cfg0)
        self.A1, self.A2 = embed(A1, lat), embed(A2, lat)
        self.window = [x for n in window_columns(lat, self.m, max(interaction.range, 1)) for x in lat.column_sites(n)]
        self.S_m = s3_diagonal(lat, lat.column_sites(self.m))
        self.S_m2 = s3_diagonal(lat, lat.column_sites(self.m + L // 2))

    def W(self, theta: float) -> np.ndarray:
        return window_rotation(self.lattice, self.m, theta)

    def twisted_ground(self, theta: float) -> np.ndarray:
        return self.W(theta) * self.spec.psi0


def _anti_residual(B: np.ndarray) -> float:
    n = np.linalg.norm(B, 2)
    return float(np.linalg.norm(B + B.conj().T, 2) / n) if n else 0.0


def hastings_flow(
    interaction: Interaction,
    params: FilterParams | None = None,
    cfg: FlowConfig = FlowConfig(),
    H=None,
    spec: SpectralData | None = None,
) -> FlowResult:
    """RK4 integration of the Hastings flow from psi0 at theta = 0 to 2 pi."""
    S = _Setup(interaction, cfg.m, H, spec)
    L = S.lattice.L
    gap = S.gap_report.gap
    params = FilterParams.from_gap(gap, L) if params is None else params
    psi0 = S.spec.psi0
    residuals = []

    if cfg.generator == "exact":
        b0 = b_exact_on_ground(S.A1, S.spec).vector
        G0 = np.outer(b0, psi0.conj())
        G0 = G0 - G0.conj().T
    else:
        info = {}
        G0 = b_filtered(S.A1, S.H, params, cfg.filter_backend, spec=S.spec, panels=cfg.panels, info=info)
        residuals.append(info["antihermitian_residual"])

    if cfg.mode == "rotate":
        def apply(theta, psi):
            w = S.W(theta)
            return w * (G0 @ (w.conj() * psi))
    else:
        cache = {}

        def apply(theta, psi):
            if theta not in cache:
                cache.clear()
                cache[theta] = _rebuild_generator(S, theta, params, cfg, residuals)
            return cache[theta] @ psi

    h = cfg.step
    psi = psi0.astype(complex).copy()
    rec = _Recorder(S, cfg)
    rec.record(0.0, psi)
    for k in range(cfg.theta_steps):
        th = k * h
        k1 = apply(th, psi)
        k2 = apply(th + h / 2, psi + h / 2 * k1)
        k3 = apply(th + h / 2, psi + h / 2 * k2)
        k4 = apply(th + h, psi + h * k3)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if cfg.renormalize:
            psi = psi / np.linalg.norm(psi)
        if (k + 1) % cfg.record_every == 0 or k + 1 == cfg.theta_steps:
            rec.record((k + 1) * h, psi)
    drift = float(np.max(np.abs(np.array(rec.norms) - 1.0)))
    if drift > 1e-6:
        raise NumericError(f"norm drift {drift:.3e} exceeds 1e-6; increase theta_steps")
    return FlowResult(
        psi_final=psi,
        thetas=np.array(rec.thetas),
        norms=np.array(rec.norms),
        energies=np.array(rec.energies),
        overlaps=np.array(rec.overlaps),
        trace_distances=np.array(rec.trace),
        d1_norms=np.array(rec.d1),
        d1_d2=np.array(rec.d1d2),
        params=params,
        config=cfg,
        m=S.m,
        E0=S.spec.E0,
        gap=gap,
        antihermitian_residual=max(residuals) if residuals else 0.0,
        norm_drift=drift,
        states=rec.states,
    )


def _rebuild_generator(S: _Setup, theta: float, params: FilterParams, cfg: FlowConfig, residuals: list) -> np.ndarray:
    tc = TwistConfig(theta, -theta, S.m)
    Ht = twisted_hamiltonian(S.H, S.interaction, tc).full
    spec = diagonalize(Ht, "dense", sectors=S.total_s3)
    rep = ground_and_gap(spec)
    if rep.degenerate:
        raise LSMConditionError("LSM5", f"degenerate twisted ground state at theta = {theta!r}")
    A1 = embed(twist_derivative(S.interaction, tc)[0], S.lattice)
    if cfg.generator == "exact":
        b = b_exact_on_ground(A1, spec).vector
        G = np.outer(b, spec.psi0.conj())
        return G - G.conj().T
    info = {}
    B = b_filtered(A1, Ht, params, cfg.filter_backend, spec=spec, panels=cfg.panels, info=info)
    residuals.append(info["antihermitian_residual"])
    return B


class _Recorder:
    def __init__(self, S: _Setup, cfg: FlowConfig):
        self.S, self.cfg = S, cfg
        self.thetas, self.norms, self.energies, self.overlaps = [], [], [], []
        self.trace, self.d1, self.d1d2, self.states = [], [], [], []
        b1 = b_exact_on_ground(S.A1, S.spec).vector
        b2 = b_exact_on_ground(S.A2, S.spec).vector
        self._b = (b1, b2)

    def record(self, theta: float, psi: np.ndarray):
        S = self.S
        w = S.W(theta)
        g = w * S.spec.psi0  # psi0(theta, -theta)
        self.thetas.append(theta)
        self.norms.append(float(np.linalg.norm(psi)))
        u = w.conj() * psi
        self.energies.append(float(np.real(np.vdot(u, S.H @ u))))
        self.overlaps.append(abs(complex(np.vdot(g, psi))))
        r1 = partial_trace(psi, S.window, S.dims)
        r0 = partial_trace(g, S.window, S.dims)
        self.trace.append(trace_norm(r1 - r0))
        d1, d2 = d_vectors(S, theta, self._b)
        self.d1.append(float(np.linalg.norm(d1)))
        self.d1d2.append(complex(np.vdot(d1, d2)))
        if self.cfg.keep_states:
            self.states.append(psi.copy())


def d_vectors(S: _Setup, theta: float, b=None):
    """(D_1(theta) psi0(theta,-theta), D_2(theta) psi0(theta,-theta)).

    D_i = i S3(column) + T' B_i T'^* - B_i with T' the phase-normalized
    twisted translation, so T'^* psi0(theta,-theta) = psi0(theta,-theta).
    With T^* S_x T = S_{x+e1} the twist derivative of T_{theta,-theta}
    produces the S3 sums of columns m and m + L/2.
    """
    if b is None:
        b = (b_exact_on_ground(S.A1, S.spec).vector, b_exact_on_ground(S.A2, S.spec).vector)
    w = S.W(theta)
    g = w * S.spec.psi0
    Tt = twisted_translation(S.lattice, TwistConfig(theta, -theta, S.m), S.T)
    ev = complex(np.vdot(g, Tt @ g))
    Tn = Tt * (np.conj(ev) / abs(ev))
    out = []
    for Scol, bi in zip((S.S_m, S.S_m2), b):
        v = w * bi  # B_i(theta) psi0(theta,-theta)
        out.append(1j * Scol * g + Tn @ v - v)
    return out[0], out[1]


@dataclass(frozen=True)
class LSMDiagnostics:
    excitation_energy: float
    overlap: float
    overlap_majorant: float
    trace_distances: np.ndarray
    d1_norms: np.ndarray
    d1_d2: np.ndarray
    translation_sign: float
    b_window_deviation: float | None = None
    b_ground_deviation: float | None = None


def lsm_diagnostics(
    flow: FlowResult,
    interaction: Interaction,
    spec: SpectralData | None = None,
    H=None,
    remainders: bool = False,
) -> LSMDiagnostics:
    """Excitation energy, orthogonality and its majorant, per-theta window data.

    With ``remainders`` the theta-independent deviations ||B_{a,T} - B^{(W)}_{a,T}||
    and ||(B_{a,T} - B_1) P0|| are also evaluated (dense only).
    """
    S = _Setup(interaction, flow.m, H, spec)
    psi1 = flow.psi_final
    n1 = np.linalg.norm(psi1)
    E1 = float(np.real(np.vdot(psi1, S.H @ psi1))) / n1 ** 2
    psi0 = S.spec.psi0
    overlap = abs(complex(np.vdot(psi1, psi0))) / n1
    ev = complex(np.vdot(psi0, S.T @ psi0))
    T2pi = twisted_translation(S.lattice, TwistConfig(2 * math.pi, 0.0, S.m), S.T) * (np.conj(ev) / abs(ev))
    majorant = 0.5 * float(np.linalg.norm(T2pi @ psi1 - psi1)) / n1
    Tn = S.T * (np.conj(ev) / abs(ev))
    sign = float(np.real(np.vdot(psi0, (T2pi.conj().T @ Tn) @ psi0)))  # <T_{2pi,0}^* T> on psi0
    bw = bg = None
    if remainders:
        bw, bg = _remainders(S, flow)
    return LSMDiagnostics(E1 - S.spec.E0, overlap, majorant, flow.trace_distances, flow.d1_norms, flow.d1_d2, sign, bw, bg)


def _remainders(S: _Setup, flow: FlowResult):
    params, cfg = flow.params, flow.config
    B = b_filtered(S.A1, S.H, params, cfg.filter_backend, spec=S.spec, panels=cfg.panels)
    split = twisted_hamiltonian(S.H, S.interaction, S.cfg0)
    specW = diagonalize(split.window, "dense", sectors=S.total_s3)
    BW = b_filtered(S.A1, split.window, params, "spectral", spec=specW, panels=cfg.panels)
    b1 = b_exact_on_ground(S.A1, S.spec).vector
    dev_w = float(np.linalg.norm(B - BW, 2))
    dev_g = float(np.linalg.norm(B @ S.spec.psi0 - b1))
    return dev_w, dev_g


def refined_gap_bound(excitation_energy: float, overlap: float) -> float:
    """(<psi1, H psi1> - E0) / (1 - |<psi1, psi0>|^2), an upper bound on the gap."""
    if not overlap < 1 - 1e-6:
        raise PreconditionError(f"overlap {overlap:.9f} too close to 1: the bound is vacuous")
    return excitation_energy / (1.0 - overlap ** 2)
