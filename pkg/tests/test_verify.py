import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lsmlab.algebra import LocalOperator, embed, site_operator
from lsmlab.errors import DomainError, PreconditionError
from lsmlab.filter import FilterParams
from lsmlab.lattice import DecayFunction
from lsmlab.model import TwistConfig, twist_derivative, twisted_hamiltonian
from lsmlab.verify import (
    BoundReport,
    clustering_check,
    clustering_constants,
    clustering_integrals,
    decoupling_check,
    fit_envelope,
    gap_lemma_check,
    lieb_robinson_check,
    restriction_dynamics_check,
    tolerance_report,
)

F = DecayFunction.polynomial(1, 1.0, lam=0.5)


def test_report_margin_rule():
    r = BoundReport("x", np.array([0.0, 1.0]), np.array([1.0, 2.0]), np.array([1.0, 2.0 - 1e-10]), scale=2.0)
    assert r.worst_margin == pytest.approx(-1e-10)
    assert r.passed
    r = BoundReport("x", np.array([0.0]), np.array([3.0]), np.array([2.0]), scale=3.0)
    assert not r.passed
    empty = BoundReport("x", np.array([]), np.array([]), np.array([]))
    assert empty.passed and empty.worst_margin == math.inf
    t = tolerance_report("dev", [0, 1], [1e-13, 2e-12], 1e-12)
    assert not t.passed and t.worst_margin == pytest.approx(-1e-12)


def test_lieb_robinson_ring8(ring8):
    I, H, spec = ring8
    lat = I.lattice
    A, B = site_operator(lat, 0), site_operator(lat, 4)
    rep = lieb_robinson_check(I, A, B, F, np.linspace(0, 2, 21), spec=spec)
    assert rep.passed
    assert rep.lhs[0] <= 1e-14 and rep.rhs[0] == 0.0
    assert np.all(rep.lhs <= 2 * A.norm * B.norm + 1e-12)
    assert rep.meta["distance"] == 4


def test_lieb_robinson_overlapping(ring8):
    I, H, spec = ring8
    lat = I.lattice
    A = site_operator(lat, 2, "S1")
    B = LocalOperator((2, 3), np.kron([[0, 1], [1, 0]], [[1, 0], [0, -1]]))
    rep = lieb_robinson_check(I, A, B, F, np.linspace(0, 1, 11), spec=spec)
    assert rep.passed
    assert rep.rhs[0] > 0  # overlapping supports keep the constant term


def test_lieb_robinson_margins_vs_lambda(ring8):
    I, H, spec = ring8
    lat = I.lattice
    A, B = site_operator(lat, 0), site_operator(lat, 4)
    ts = np.linspace(0, 1, 6)
    for lam in (0.1, 0.5, 1.0, 2.0):
        assert lieb_robinson_check(I, A, B, F.with_lambda(lam), ts, spec=spec).passed


def test_restriction_trivial_split(ring6):
    I, H, spec = ring6
    A = embed(site_operator(I.lattice, 0), I.lattice)
    rep = restriction_dynamics_check(H, 0 * H, A, np.linspace(0, 1, 5))
    assert np.max(rep.lhs) <= 1e-12 and rep.passed


def test_restriction_and_decoupling_ring8(ring8):
    I, H, spec = ring8
    cfg = TwistConfig(1.0, -1.0).resolve(I)
    split = twisted_hamiltonian(H, I, cfg)
    A1 = embed(twist_derivative(I, cfg)[0], I.lattice)
    rep = restriction_dynamics_check(split.full, split.strip, A1, np.linspace(0, 1, 6))
    assert rep.passed, rep.summary()
    assert np.all(rep.lhs[1:] > 0)
    p = FilterParams.from_gap(spec.energies[1] - spec.E0, 8)
    c3 = 0.5 * 8 / 4
    env = fit_envelope(split.full, split.strip, A1, p.a, c3, points=80)
    assert np.all(env.samples <= env.c1 * np.exp(env.c2 * env.grid - env.c3))
    assert p.a * env.M ** 2 + env.c2 * env.M - c3 == pytest.approx(0, abs=1e-10)
    dc = decoupling_check(split.full, split.strip, A1, p, c3, env)
    assert dc.passed and dc.worst_margin >= 0


def test_clustering_dimerized(dimerized10):
    I, H, spec = dimerized10
    lat = I.lattice
    F1 = F.with_lambda(1.0)
    point, ints = clustering_check(I, spec, site_operator(lat, 0), site_operator(lat, 5), F1)
    assert point.passed and ints.passed
    assert len(point.grid) > 0 and point.grid[-1] == pytest.approx(point.meta["t_max"])
    mu, d, cab, t_max = clustering_constants(I, F1, spec.energies[1] - spec.E0, (0,), (5,))
    # static case, t = 0
    assert point.lhs[0] <= cab * 0.25 * math.exp(-mu * d) + 1e-12
    assert ints.meta["single_integral"] <= ints.meta["spectral_sum"] + 1e-12


def test_clustering_requires_distance(dimerized10):
    I, H, spec = dimerized10
    with pytest.raises(DomainError):
        clustering_check(I, spec, site_operator(I.lattice, 0), site_operator(I.lattice, 0), F)
    with pytest.raises(PreconditionError):
        clustering_check(I, spec, site_operator(I.lattice, 0), LocalOperator((5,), np.eye(2)), F, project=False)


def test_spectral_sum_oracle(dimerized10):
    I, H, spec = dimerized10
    lat = I.lattice
    A = embed(site_operator(lat, 0), lat).toarray()
    A = A - np.vdot(spec.psi0, A @ spec.psi0) * np.eye(A.shape[0])
    I1, I2, ssum = clustering_integrals(spec, A, A.conj().T)  # A_0k (A*)_k0 = |A_0k|^2 >= 0
    assert I1 == pytest.approx(ssum, rel=1e-9)
    E = spec.energies - spec.E0
    w = np.abs(spec.states.conj().T @ (A @ spec.psi0)) ** 2
    assert I2 == pytest.approx(np.sum(w[1:] / E[1:] ** 2), rel=1e-9)


def test_gap_lemma(dimerized10):
    I, H, spec = dimerized10
    g = spec.energies[1] - spec.E0
    A = embed(site_operator(I.lattice, 3, "S1"), I.lattice).toarray()
    A = A - np.vdot(spec.psi0, A @ spec.psi0) * np.eye(A.shape[0])
    pairs = [(g / 10, 1.0), (g / 10, 2.0), (g / 20, 4.0), (g / 5, 1.0), (g / 4, 2.0)]
    rep = gap_lemma_check(spec, A, pairs)
    assert rep.passed and rep.worst_margin >= 0
    with pytest.raises(DomainError):
        gap_lemma_check(spec, A, [(g, 1.0)])
