# cython: language_level=3
"""Compiled thinning kernel; mirrors `_thinning_py.run_chunk` bit for bit.

Same loop structure, same libm calls, same uniform-consumption order. Keep
the two files in sync: the backend-parity test asserts identical event
streams.
"""

from libc.math cimport exp, log1p

COMPILED = True


cdef inline void _advance(Py_ssize_t n, double beta, double dt,
                          double[::1] S, double[::1] g,
                          double[::1] integ) noexcept nogil:
    cdef double f = exp(-beta * dt)
    cdef double scale = (1.0 - f) / beta
    cdef Py_ssize_t i
    for i in range(n):
        integ[i] += S[i] * scale
        S[i] *= f
        g[i] *= f


def run_chunk(double[::1] mu, double[:, ::1] W, double beta, double t_end,
              double t, double[::1] S, double[::1] g, double[::1] integ,
              double[:, ::1] u, double[::1] out_t, long long[::1] out_n):
    cdef Py_ssize_t n = mu.shape[0]
    cdef Py_ssize_t m = u.shape[0]
    cdef double mu_total = 0.0
    cdef Py_ssize_t i, node
    cdef Py_ssize_t k = 0, used = 0
    cdef double lam_bar, u0, u1, wait, target, acc
    for i in range(n):
        mu_total += mu[i]
    while used < m:
        lam_bar = mu_total
        for i in range(n):
            lam_bar += g[i]
        if lam_bar <= 0.0:
            _advance(n, beta, t_end - t, S, g, integ)
            return k, used, t_end, True
        u0 = u[used, 0]
        u1 = u[used, 1]
        used += 1
        wait = -log1p(-u0) / lam_bar
        if t + wait >= t_end:
            _advance(n, beta, t_end - t, S, g, integ)
            return k, used, t_end, True
        _advance(n, beta, wait, S, g, integ)
        t = t + wait
        target = u1 * lam_bar
        acc = 0.0
        node = -1
        for i in range(n):
            acc += mu[i] + g[i]
            if target < acc:
                node = i
                break
        if node >= 0:
            out_t[k] = t
            out_n[k] = node
            k += 1
            S[node] += beta
            for i in range(n):
                g[i] += beta * W[i, node]
    return k, used, t, False
