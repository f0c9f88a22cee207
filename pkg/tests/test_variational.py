import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lsmlab.errors import DomainError, LSMConditionError, PreconditionError
from lsmlab.filter import FilterParams
from lsmlab.lattice import Lattice
from lsmlab.model import TwistConfig, heisenberg, twisted_hamiltonian
from lsmlab.variational import (
    FlowConfig,
    hastings_flow,
    lsm_diagnostics,
    refined_gap_bound,
)
from lsmlab.verify import norm_preservation_check

from conftest import ring_data

GAPS = {4: 1.0, 6: 0.6847416489820959, 8: 0.5226743450925837}


@pytest.fixture(scope="module")
def flow4():
    I, H, spec = ring_data(4)
    return hastings_flow(I, None, FlowConfig(), H=H, spec=spec)


def test_flow_config_validation():
    with pytest.raises(DomainError):
        FlowConfig(theta_steps=32)
    with pytest.raises(DomainError):
        FlowConfig(mode="sideways")
    assert FlowConfig(theta_steps=64).step == pytest.approx(2 * math.pi / 64)


def test_flow_norm_and_start(flow4):
    assert abs(np.linalg.norm(flow4.psi_final) - 1) <= 1e-8
    assert flow4.norm_drift <= 1e-8
    assert flow4.trace_distances[0] <= 1e-10
    assert flow4.overlaps[0] == pytest.approx(1.0, abs=1e-12)
    assert flow4.params.a == pytest.approx(0.25, abs=1e-14) and flow4.params.T == 2.0
    assert flow4.antihermitian_residual <= 1e-10


def test_flow_energy_constant_along_rotation(flow4):
    # energies are <W* psi, H W* psi>; they start at E0 and never go below it
    assert flow4.energies[0] == pytest.approx(-2.0, abs=1e-12)
    assert np.all(flow4.energies >= -2.0 - 1e-12)


def test_d_operator_identity(flow4):
    lhs = flow4.d1_norms ** 2
    rhs = flow4.d1_d2
    assert np.max(np.abs(lhs - rhs)) <= 1e-8


@pytest.mark.parametrize("L", [4, 6])
def test_step_halving(L):
    I, H, spec = ring_data(L)
    a = hastings_flow(I, None, FlowConfig(theta_steps=256), H=H, spec=spec)
    b = hastings_flow(I, None, FlowConfig(theta_steps=512), H=H, spec=spec)
    c = hastings_flow(I, None, FlowConfig(theta_steps=1024), H=H, spec=spec)
    d1 = np.linalg.norm(a.psi_final - b.psi_final)
    d2 = np.linalg.norm(b.psi_final - c.psi_final)
    assert d2 <= 1e-6
    if d2 > 1e-13:
        assert d1 / d2 > 8  # fourth order: ideal ratio 16


def test_rotate_equals_rebuild():
    I, H, spec = ring_data(4)
    cfg = dict(theta_steps=64)
    a = hastings_flow(I, None, FlowConfig(mode="rotate", **cfg), H=H, spec=spec)
    b = hastings_flow(I, None, FlowConfig(mode="rebuild", **cfg), H=H, spec=spec)
    assert np.linalg.norm(a.psi_final - b.psi_final) <= 1e-10


def test_quadrature_backend_flow():
    I, H, spec = ring_data(4)
    a = hastings_flow(I, None, FlowConfig(theta_steps=64), H=H, spec=spec)
    b = hastings_flow(I, None, FlowConfig(theta_steps=64, filter_backend="quadrature"), H=H, spec=spec)
    assert np.linalg.norm(a.psi_final - b.psi_final) <= 1e-6


def test_exact_generator_first_order():
    I, H, spec = ring_data(4)
    fl = hastings_flow(I, None, FlowConfig(theta_steps=128, generator="exact", keep_states=True), H=H, spec=spec)
    dists = []
    for k in (1, 2):
        th = fl.thetas[k]
        g = np.linalg.eigh(twisted_hamiltonian(H, I, TwistConfig(th, 0.0, fl.m)).full.toarray())[1][:, 0]
        ov = np.vdot(g, fl.states[k])
        dists.append(np.linalg.norm(fl.states[k] - ov / abs(ov) * g))
        ov0 = np.vdot(g, spec.psi0)
        zeroth = np.linalg.norm(spec.psi0 - ov0 / abs(ov0) * g)
        assert dists[-1] <= 0.02 * zeroth
    # second-order remainder: doubling theta quadruples the error
    assert 3.5 <= dists[1] / dists[0] <= 4.5


@pytest.mark.parametrize("L", [4, 6, 8])
def test_refined_bound_above_gap(L):
    I, H, spec = ring_data(L)
    flow = hastings_flow(I, None, FlowConfig(), H=H, spec=spec)
    diag = lsm_diagnostics(flow, I, spec=spec, H=H)
    assert diag.excitation_energy >= -1e-12
    assert diag.overlap <= diag.overlap_majorant + 1e-9
    assert diag.translation_sign == pytest.approx(-1.0, abs=1e-12)
    assert refined_gap_bound(diag.excitation_energy, diag.overlap) >= GAPS[L] - 1e-9


def test_remainder_diagnostics():
    I, H, spec = ring_data(4)
    flow = hastings_flow(I, None, FlowConfig(theta_steps=64), H=H, spec=spec)
    diag = lsm_diagnostics(flow, I, spec=spec, H=H, remainders=True)
    assert diag.b_window_deviation >= 0 and diag.b_ground_deviation >= 0


def test_refined_bound_cases():
    assert refined_gap_bound(0.7, 0.0) == 0.7
    assert refined_gap_bound(1.0, 0.5) == pytest.approx(4 / 3)
    with pytest.raises(PreconditionError):
        refined_gap_bound(0.0, 1.0)


def test_refined_bound_exact_excited_state(ring4):
    I, H, spec = ring4
    psi1 = spec.states[:, 1]
    dE = np.vdot(psi1, H @ psi1).real - spec.E0
    ov = abs(np.vdot(psi1, spec.psi0))
    assert refined_gap_bound(dE, ov) == pytest.approx(1.0, abs=1e-12)


def test_even_parity_rejected():
    I = heisenberg(Lattice(4, 2, "ladder"))
    with pytest.raises(LSMConditionError, match="LSM4"):
        hastings_flow(I, None, FlowConfig(theta_steps=64))


@given(st.integers(0, 2 ** 31 - 1))
def test_norm_preserving_flow(seed):
    rng = np.random.default_rng(seed)
    n = 6
    G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    K = G - G.conj().T
    D = np.diag(rng.normal(size=n))
    beta0 = rng.normal(size=n) + 1j * rng.normal(size=n)

    def gen(th):
        return K * math.cos(th) + 1j * D

    def beta(th):
        return beta0 * math.sin(3 * th)

    Y0 = rng.normal(size=n) + 1j * rng.normal(size=n)
    rep = norm_preservation_check(gen, beta, Y0, theta_max=2.0, steps=256)
    assert rep.passed, rep.summary()
