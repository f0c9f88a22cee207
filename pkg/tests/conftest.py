"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the package's embedding code: they build
Hamiltonians with explicit Kronecker products.
"""

import functools

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2


def kron_site(op, i, N):
    out = np.ones((1, 1), dtype=complex)
    for k in range(N):
        out = np.kron(out, op if k == i else np.eye(2))
    return out


def kron_ring(L, couplings=None):
    """Spin-1/2 Heisenberg ring via np.kron; couplings[n] is the bond (n, n+1)."""
    D = 2 ** L
    H = np.zeros((D, D), dtype=complex)
    for n in range(L):
        J = 1.0 if couplings is None else couplings[n]
        for S in (SX, SY, SZ):
            H += J * kron_site(S, n, L) @ kron_site(S, (n + 1) % L, L)
    return H


@functools.lru_cache(maxsize=None)
def ring_data(L):
    from lsmlab.lattice import Lattice
    from lsmlab.model import build_hamiltonian, heisenberg
    from lsmlab.spectral import diagonalize

    I = heisenberg(Lattice(L))
    H = build_hamiltonian(I)
    return I, H, diagonalize(H, "dense")


@pytest.fixture(scope="session")
def ring4():
    return ring_data(4)


@pytest.fixture(scope="session")
def ring6():
    return ring_data(6)


@pytest.fixture(scope="session")
def ring8():
    return ring_data(8)


@pytest.fixture(scope="session")
def dimerized10():
    from lsmlab.model import build_hamiltonian, dimerized_chain
    from lsmlab.spectral import diagonalize

    I = dimerized_chain(10)
    H = build_hamiltonian(I)
    return I, H, diagonalize(H, "dense")
