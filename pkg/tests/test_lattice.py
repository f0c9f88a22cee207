import itertools
import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lsmlab.errors import DomainError
from lsmlab.lattice import (
    DecayFunction,
    Lattice,
    Site,
    decay_constants,
    distance,
    interaction_norms,
    lattice_series_bound,
)
from lsmlab.model import Interaction, heisenberg


def bfs_distances(lat):
    adj = {i: set() for i in range(lat.n_sites)}
    for i, j in lat.edges:
        adj[i].add(j)
        adj[j].add(i)
    out = np.full((lat.n_sites, lat.n_sites), np.inf)
    for s in adj:
        out[s, s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if out[s, v] == np.inf:
                    out[s, v] = out[s, u] + 1
                    q.append(v)
    return out


def test_chain_wraps():
    lat = Lattice(8)
    assert distance(lat, Site(1), Site(8)) == 1


def test_ladder_distance_matches_bfs():
    lat = Lattice(6, 3, "ladder")
    assert distance(lat, Site(1, 0), Site(4, 2)) == 5
    np.testing.assert_array_equal(lat.distances, bfs_distances(lat))


@pytest.mark.parametrize("args", [(4,), (8,), (4, 2, "ladder"), (6, 3, "cylinder")])
def test_metric_axioms(args):
    D = Lattice(*args).distances
    assert np.all(np.diag(D) == 0)
    np.testing.assert_array_equal(D, D.T)
    N = len(D)
    for x, y, z in itertools.product(range(N), repeat=3):
        assert D[x, z] <= D[x, y] + D[y, z]


def test_odd_L_rejected():
    with pytest.raises(DomainError, match="L must be even"):
        Lattice(5)


def test_bad_spin_rejected():
    with pytest.raises(DomainError):
        Lattice(4, spins=("1/3",))


def test_index_roundtrip():
    lat = Lattice(6, 3, "ladder")
    for i in range(lat.n_sites):
        assert lat.index(lat.site(i)) == i
    assert lat.index(Site(2, 1)) == 1 * 3 + 1


def test_decay_norm_direct_sum():
    lat = Lattice(8)
    F = DecayFunction.polynomial(1, 1.0, lam=0.0)
    norm, conv = decay_constants(lat, F)
    # distances from any site on the 8-ring: 0, 1, 1, 2, 2, 3, 3, 4
    expect = sum((1 + r) ** -2.0 for r in (0, 1, 1, 2, 2, 3, 3, 4))
    assert norm == pytest.approx(expect, rel=1e-14)
    assert conv > 0


@pytest.mark.parametrize("L", [4, 8, 16])
def test_convolution_constant_below_series_bound(L):
    _, C = decay_constants(Lattice(L), DecayFunction.polynomial(1, 1.0, lam=0.0))
    assert C <= lattice_series_bound(1, 1.0)


def test_series_bound_one_dimension():
    # 2^3 (1 + 2 (zeta(2) - 1)) for d = eps = 1
    assert lattice_series_bound(1, 1.0) == pytest.approx(8 * (1 + 2 * (math.pi ** 2 / 6 - 1)), rel=1e-14)


@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_decay_constants_monotone_in_lambda(l1, l2):
    lat = Lattice(8)
    lo, hi = sorted((l1, l2))
    F = DecayFunction.polynomial(1, 1.0)
    n1, c1 = decay_constants(lat, F.with_lambda(lo))
    n2, c2 = decay_constants(lat, F.with_lambda(hi))
    assert n2 <= n1 * (1 + 1e-14)
    assert c2 <= c1 * (1 + 1e-14)


def test_heisenberg_norms():
    lat = Lattice(8)
    I = heisenberg(lat)
    for t in I.terms:
        assert np.linalg.norm(t.matrix, 2) == pytest.approx(0.75, abs=1e-14)
    F = DecayFunction.polynomial(1, 1.0, lam=1.0)
    phi, one, two = interaction_norms(lat, I, F)
    assert one == pytest.approx(1.5, abs=1e-14)
    assert one <= phi * decay_constants(lat, F)[0]
    assert two > 0


def test_zero_interaction_norms():
    lat = Lattice(4)
    I = Interaction(lat, ())
    assert interaction_norms(lat, I, DecayFunction.polynomial(1)) == (0.0, 0.0, 0.0)


@given(st.floats(0.0, 3.0))
def test_one_norm_below_lambda_norm(lam):
    lat = Lattice(6, 2, "ladder")
    I = heisenberg(lat)
    F = DecayFunction.polynomial(2, 1.0, lam=lam)
    phi, one, _ = interaction_norms(lat, I, F)
    assert one <= phi * decay_constants(lat, F)[0] * (1 + 1e-12)
