"""Pure-Python thinning kernel for exponential-kernel multivariate Hawkes.

Reference implementation of the chunked kernel contract shared with the
compiled backend (`_thinning.pyx`). The two must stay bit-identical: scalar
loops only, `math.exp` / `math.log1p` (libm) for transcendentals, and the
exact same uniform-consumption order (two uniforms per candidate: waiting
time, then accept-and-select).

State carried across calls (all updated in place):
  S      per-source excitation, S[j] = sum over past events of node j of
         beta * exp(-beta * (t - t_k)); an event at j adds beta.
  g      cached target excitation, g[i] = (W @ S)[i]; the caller recomputes it
         whenever W changes.
  integ  accumulated integral of S over time since the caller reset it
         (drives exact integrated-intensity metrics).
"""

import math

COMPILED = False


def run_chunk(mu, W, beta, t_end, t, S, g, integ, u, out_t, out_n):
    """Consume up to ``len(u)`` candidate draws; returns
    ``(n_events, pairs_used, t_new, done)``."""
    n = mu.shape[0]
    m = u.shape[0]
    mu_total = 0.0
    for i in range(n):
        mu_total += mu[i]
    k = 0
    used = 0
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
        wait = -math.log1p(-u0) / lam_bar
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


def _advance(n, beta, dt, S, g, integ):
    """Decay excitation over ``dt`` and accumulate the exact integral of S."""
    f = math.exp(-beta * dt)
    scale = (1.0 - f) / beta
    for i in range(n):
        integ[i] += S[i] * scale
        S[i] *= f
        g[i] *= f
