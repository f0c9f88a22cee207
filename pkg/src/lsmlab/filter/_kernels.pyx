# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled filter-weight kernel.

Same contract as :func:`lsmlab.filter._fallback.weight_table`.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, erfc, sqrt
from scipy.special.cython_special cimport erfcx

cnp.import_array()


cdef inline double _integrand(double t, double E, double a, double sa) noexcept nogil:
    cdef double x = (E + 2.0 * a * t) / (2.0 * sa)
    if x >= 0.0:
        return exp(-E * E / (4.0 * a) - a * t * t) * erfcx(x)
    return exp(t * E) * erfc(x)


def weight_table(double[::1] E, double a, double[::1] nodes, double[::1] weights):
    cdef Py_ssize_t n = E.shape[0], q = nodes.shape[0], i, j
    cdef double sa = sqrt(a), acc, e
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            e = E[i]
            acc = 0.0
            for j in range(q):
                acc = acc + weights[j] * _integrand(nodes[j], e, a, sa)
            o[i] = 0.5 * acc
    return out
