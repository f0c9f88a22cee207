"""Pure numpy filter-weight kernel, used when the compiled one is absent."""

import numpy as np
from scipy.special import erfc, erfcx


def integrand(t, E, a):
    """(1/2 excluded) e^{tE} erfc((E + 2at) / 2 sqrt(a)), evaluated without overflow."""
    t, E = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(E, dtype=float))
    x = (E + 2.0 * a * t) / (2.0 * np.sqrt(a))
    out = np.empty(x.shape)
    pos = x >= 0
    out[pos] = np.exp(-E[pos] ** 2 / (4.0 * a) - a * t[pos] ** 2) * erfcx(x[pos])
    neg = ~pos
    out[neg] = np.exp(t[neg] * E[neg]) * erfc(x[neg])
    return out


def weight_table(E, a, nodes, weights, chunk=4096):
    E = np.ascontiguousarray(E, dtype=float)
    out = np.empty(E.shape[0])
    for lo in range(0, E.shape[0], chunk):
        e = E[lo:lo + chunk, None]
        out[lo:lo + chunk] = 0.5 * (integrand(nodes[None, :], e, a) @ weights)
    return out
