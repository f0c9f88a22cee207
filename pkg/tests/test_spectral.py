import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from scipy.linalg import expm

from lsmlab.algebra import embed, s3_diagonal, site_operator, translation_operator
from lsmlab.errors import BoundViolation, LSMConditionError, NumericError, UsageError
from lsmlab.lattice import Lattice
from lsmlab.model import (TwistConfig, build_hamiltonian, heisenberg, twisted_hamiltonian,
                          twisted_translation, window_rotation)
from lsmlab.spectral import (
    degeneracy_tolerance,
    diagonalize,
    energy_surface,
    evolve,
    fix_phases,
    ground_and_gap,
    simple_gap_bound,
)

# lowest energy and gap of the spin-1/2 Heisenberg ring, from np.kron + eigvalsh
RING = {
    4: (-2.0, 1.0),
    6: (-2.802775637731993, 0.6847416489820959),
    8: (-3.6510934089371663, 0.5226743450925837),
    10: (-4.515446354492037, 0.4232390077533541),
}


def test_closed_form_ring6():
    assert RING[6][0] == pytest.approx(-(2 + math.sqrt(13)) / 2, abs=1e-14)


@pytest.mark.parametrize("L", [4, 6, 8])
def test_ring_energies(L):
    H = build_hamiltonian(heisenberg(Lattice(L)))
    spec = diagonalize(H, "dense")
    assert spec.E0 == pytest.approx(RING[L][0], abs=1e-10)
    assert spec.energies[1] - spec.E0 == pytest.approx(RING[L][1], abs=1e-10)


def test_ring4_levels_and_gap(ring4):
    I, H, spec = ring4
    np.testing.assert_allclose(spec.energies[:2], [-2, -1], atol=1e-12)
    rep = ground_and_gap(spec, translation_operator(I.lattice), require_unique=True)
    assert rep.gap == pytest.approx(1.0, abs=1e-12)
    assert not rep.degenerate
    assert abs(rep.translation_eigenvalue - 1) <= 1e-9


def test_diag_trivial():
    spec = diagonalize(np.diag([3.0, 1.0, 2.0]), "dense")
    np.testing.assert_array_equal(spec.energies, [1, 2, 3])


def test_krylov_matches_dense(ring8):
    I, H, spec = ring8
    kr = diagonalize(H, "krylov", k=5)
    assert not kr.complete
    np.testing.assert_allclose(kr.energies[:5], spec.energies[:5], atol=1e-8)


def test_sector_blocking_agrees(ring8):
    I, H, spec = ring8
    sectors = s3_diagonal(I.lattice, range(I.lattice.n_sites))
    blocked = diagonalize(H, "dense", sectors=sectors)
    np.testing.assert_allclose(blocked.energies, spec.energies, atol=1e-12)
    assert abs(abs(np.vdot(blocked.psi0, spec.psi0)) - 1) < 1e-10


def test_sector_leak_detected():
    H = np.array([[0, 1], [1, 0]], dtype=complex)
    with pytest.raises(NumericError):
        diagonalize(H, "dense", sectors=np.array([0.5, -0.5]))


def test_non_hermitian_rejected():
    with pytest.raises(NumericError):
        diagonalize(np.array([[0, 1], [0, 0]], dtype=complex))


def test_dense_limit():
    with pytest.raises(UsageError):
        diagonalize(np.eye(8), "dense", dense_max_dim=4)


def test_phase_convention():
    V = fix_phases(np.array([[0.1j, 1], [-0.9j, 0]]))
    assert V[1, 0].real > 0 and V[1, 0].imag == 0
    assert V[0, 1] == 1


def test_degenerate_cases():
    spec = diagonalize(np.zeros((4, 4)), "dense")
    assert ground_and_gap(spec).degenerate
    H = build_hamiltonian(heisenberg(Lattice(6), J=-1.0))
    rep = ground_and_gap(diagonalize(H, "dense"))
    assert rep.degenerate
    with pytest.raises(LSMConditionError, match="LSM5"):
        rep.require_unique()
    assert degeneracy_tolerance(-100.0) == pytest.approx(1e-7)


def test_evolve_operator(ring6):
    I, H, spec = ring6
    A = embed(site_operator(I.lattice, 0, "S1"), I.lattice).toarray()
    np.testing.assert_allclose(evolve(spec, A, 0.0), A, atol=1e-13)
    t = 0.73
    U = expm(1j * t * H.toarray())
    At = evolve(spec, A, t)
    assert np.linalg.norm(At - U @ A @ U.conj().T, 2) <= 1e-9
    assert np.linalg.norm(At, 2) == pytest.approx(0.5, abs=1e-12)


def test_evolve_vector_and_imaginary(ring4):
    I, H, spec = ring4
    rng = np.random.default_rng(0)
    psi = rng.normal(size=16) + 0j
    t = 0.4
    np.testing.assert_allclose(evolve(spec, psi, t), expm(-1j * t * H.toarray()) @ psi, atol=1e-12)
    Hs = H.toarray() - spec.E0 * np.eye(16)
    np.testing.assert_allclose(evolve(spec, psi, t, imaginary=True), expm(-t * Hs) @ psi, atol=1e-12)
    A = embed(site_operator(I.lattice, 1), I.lattice).toarray()
    np.testing.assert_allclose(evolve(spec, A, t, imaginary=True), expm(-t * Hs) @ A @ expm(t * Hs), atol=1e-11)


def test_energy_surface_ring6():
    I = heisenberg(Lattice(6))
    H = build_hamiltonian(I)
    m = TwistConfig().resolve(I).m

    def builder(a, b):
        return twisted_hamiltonian(H, I, TwistConfig(a, b, m)).full

    line = np.linspace(0, 2 * np.pi, 7)
    surf = energy_surface(builder, [0.0, math.pi], [0.0], line=line, h=1e-4)
    np.testing.assert_allclose(surf.line_E0, RING[6][0], atol=1e-10)
    assert np.max(np.abs(surf.d1)) <= 1e-6
    assert np.max(np.abs(surf.d2)) <= 1e-6
    assert surf.table[1, 0] - surf.table[0, 0] > 1e-3


@pytest.mark.parametrize("th", [0.4, 1.7, math.pi])
def test_twisted_ground_is_rotated_ground(ring6, th):
    I, H, spec = ring6
    cfg = TwistConfig(th, -th).resolve(I)
    Ht = twisted_hamiltonian(H, I, cfg).full.toarray()
    psi_t = np.linalg.eigh(Ht)[1][:, 0]
    w = window_rotation(I.lattice, cfg.m, th)
    assert abs(abs(np.vdot(w * spec.psi0, psi_t)) - 1) <= 1e-9
    Tt = twisted_translation(I.lattice, cfg)
    ev = np.vdot(psi_t, Tt @ psi_t)
    assert abs(abs(ev) - 1) <= 1e-9


def test_total_spin_zero(ring8):
    I, H, spec = ring8
    tot = s3_diagonal(I.lattice, range(8))
    assert abs(np.vdot(spec.psi0, tot * spec.psi0)) <= 1e-12


def test_simple_gap_bound(ring4):
    I, H, spec = ring4
    res = simple_gap_bound(H, spec, I.lattice.site_dims(), 0, one_norm=1.5)
    assert abs(np.vdot(spec.psi0, res.trial)) <= 1e-10
    assert 1.0 <= res.value <= 3.0
    with pytest.raises(BoundViolation):
        simple_gap_bound(H, spec, I.lattice.site_dims(), 0, one_norm=1e-3)


@given(st.integers(0, 7))
def test_simple_gap_bound_any_site(site):
    I = heisenberg(Lattice(8))
    H = build_hamiltonian(I)
    spec = diagonalize(H, "dense")
    res = simple_gap_bound(H, spec, I.lattice.site_dims(), site, one_norm=1.5)
    assert RING[8][1] <= res.value + 1e-12
    assert res.overlap <= 1e-10
