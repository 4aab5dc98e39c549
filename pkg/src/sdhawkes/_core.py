"""Compiled O(N) recursions for exponential kernels.

All routines walk the event list once, carrying the decayed sums
``S[e', x'] = sum_i exp(-beta (t - t_i))`` over past events of type ``e'``
with post-event state ``x'`` (strictly before ``t``) and, for gradients,
``S1[e', x'] = sum_i (t - t_i) exp(-beta (t - t_i))``.
"""

import math

import numpy as np
from numba import njit

#: Decayed terms below this are flushed to zero.
UNDERFLOW = 1e-300

STATUS_OK = 0
STATUS_EXPLODED = 1


@njit(cache=True)
def loglik_event_type(times, events, states, t0, T, e, nu_e, alpha_e, beta_e, want_grad):
    """Terms of the type-``e`` subproblem ``l_plus - l_minus``.

    ``alpha_e``/``beta_e`` are the ``(d_e, d_x)`` slices ``alpha[:, :, e]``.
    Returns ``(l_plus, l_minus, g_nu, g_alpha, g_beta, min_lambda)`` where the
    gradients are those of ``l_plus - l_minus``.
    """
    d_e, d_x = alpha_e.shape
    n = times.shape[0]
    S = np.zeros((d_e, d_x))
    S1 = np.zeros((d_e, d_x))
    g_alpha = np.zeros((d_e, d_x))
    g_beta = np.zeros((d_e, d_x))
    g_nu = 0.0
    l_plus = 0.0
    min_lam = np.inf
    t_prev = 0.0
    for k in range(n):
        t = times[k]
        if k > 0:
            dt = t - t_prev
            for i in range(d_e):
                for j in range(d_x):
                    s = S[i, j]
                    if s == 0.0:
                        continue
                    d = math.exp(-beta_e[i, j] * dt)
                    if want_grad:
                        S1[i, j] = d * (S1[i, j] + dt * s)
                    s = d * s
                    if s > UNDERFLOW:
                        S[i, j] = s
                    else:
                        S[i, j] = 0.0
                        S1[i, j] = 0.0
        if events[k] == e and t > t0:
            lam = nu_e
            for i in range(d_e):
                for j in range(d_x):
                    lam += alpha_e[i, j] * S[i, j]
            if lam < min_lam:
                min_lam = lam
            if lam <= 0.0:
                l_plus = -np.inf
            else:
                l_plus += math.log(lam)
                if want_grad:
                    inv = 1.0 / lam
                    g_nu += inv
                    for i in range(d_e):
                        for j in range(d_x):
                            g_alpha[i, j] += S[i, j] * inv
                            g_beta[i, j] -= alpha_e[i, j] * S1[i, j] * inv
        S[events[k], states[k]] += 1.0
        t_prev = t

    l_minus = nu_e * (T - t0)
    for k in range(n):
        i = events[k]
        j = states[k]
        a = alpha_e[i, j]
        b = beta_e[i, j]
        lo = max(t0, times[k]) - times[k]
        hi = T - times[k]
        e_lo = math.exp(-b * lo)
        bracket = -e_lo * math.expm1(-b * (hi - lo))
        l_minus += a / b * bracket
        if want_grad:
            e_hi = math.exp(-b * hi)
            g_alpha[i, j] -= bracket / b
            g_beta[i, j] -= a / b * (hi * e_hi - lo * e_lo) - a / (b * b) * bracket
    if want_grad:
        g_nu -= T - t0
    return l_plus, l_minus, g_nu, g_alpha, g_beta, min_lam


@njit(cache=True)
def gap_integrals(times, events, states, t0, T, nu, alpha, beta):
    """Integrals of every ``lambda_e`` over consecutive inter-event gaps.

    Returns ``(gaps, tail)``: ``gaps[k, e]`` integrates over
    ``(max(t0, t_{k-1}), t_k]`` for the k-th in-window event, ``tail[e]`` over
    ``(t_last, T]``.
    """
    d_e = nu.shape[0]
    d_x = alpha.shape[1]
    n = times.shape[0]
    n_hist = 0
    while n_hist < n and times[n_hist] <= t0:
        n_hist += 1
    S = np.zeros((d_e, d_x, d_e))
    c = times[0] if n_hist > 0 else t0
    for k in range(n_hist + 1):
        t = times[k] if k < n_hist else t0
        dt = t - c
        if dt > 0.0:
            for i in range(d_e):
                for j in range(d_x):
                    for m in range(d_e):
                        s = S[i, j, m] * math.exp(-beta[i, j, m] * dt)
                        S[i, j, m] = s if s > UNDERFLOW else 0.0
        if k < n_hist:
            for m in range(d_e):
                S[events[k], states[k], m] += 1.0
        c = t
    gaps = np.empty((n - n_hist, d_e))
    tail = np.empty(d_e)
    for k in range(n_hist, n + 1):
        t = times[k] if k < n else T
        dt = t - c
        for m in range(d_e):
            g = nu[m] * dt
            for i in range(d_e):
                for j in range(d_x):
                    s = S[i, j, m]
                    if s == 0.0:
                        continue
                    b = beta[i, j, m]
                    g += alpha[i, j, m] / b * s * (-math.expm1(-b * dt))
                    s = s * math.exp(-b * dt)
                    S[i, j, m] = s if s > UNDERFLOW else 0.0
            if k < n:
                gaps[k - n_hist, m] = g
            else:
                tail[m] = g
        if k < n:
            for m in range(d_e):
                S[events[k], states[k], m] += 1.0
        c = t
    return gaps, tail


@njit(cache=True)
def _rates(nu, alpha, S, lam):
    d_e = nu.shape[0]
    d_x = alpha.shape[1]
    total = 0.0
    for m in range(d_e):
        v = nu[m]
        for i in range(d_e):
            for j in range(d_x):
                v += alpha[i, j, m] * S[i, j, m]
        lam[m] = v
        total += v
    return total


@njit(cache=True)
def _pick(weights, target):
    c = 0.0
    last = 0
    for i in range(weights.shape[0]):
        if weights[i] > 0.0:
            c += weights[i]
            last = i
            if c > target:
                return i
    return last


@njit(cache=True)
def simulate_loop(nu, alpha, beta, phi, S, t_start, x_start, horizon, n_target, max_events, rng):
    """Thinning with a dominating rate equal to the right-limit total intensity.

    ``S`` (shape ``(d_e, d_x, d_e)``) holds the decayed sums at ``t_start``
    and is updated in place. Uniform draws per candidate: inter-arrival,
    acceptance; per accepted event: event type, new state.
    """
    d_e = nu.shape[0]
    d_x = alpha.shape[1]
    cap = 1024
    out_t = np.empty(cap)
    out_e = np.empty(cap, dtype=np.int64)
    out_x = np.empty(cap, dtype=np.int64)
    lam = np.empty(d_e)
    t = t_start
    x = x_start
    n = 0
    status = STATUS_OK
    R = _rates(nu, alpha, S, lam)
    while True:
        u = rng.random()
        wait = -math.log(1.0 - u) / R
        t_cand = t + wait
        if t_cand > horizon:
            break
        for i in range(d_e):
            for j in range(d_x):
                for m in range(d_e):
                    s = S[i, j, m]
                    if s != 0.0:
                        s = s * math.exp(-beta[i, j, m] * wait)
                        S[i, j, m] = s if s > UNDERFLOW else 0.0
        t = t_cand
        R_new = _rates(nu, alpha, S, lam)
        if rng.random() < R_new / R:
            ev = _pick(lam, rng.random() * R_new)
            x = _pick(phi[ev, x], rng.random())
            if n >= max_events:
                status = STATUS_EXPLODED
                break
            if n == cap:
                cap *= 2
                nt = np.empty(cap)
                ne = np.empty(cap, dtype=np.int64)
                nx = np.empty(cap, dtype=np.int64)
                nt[:n] = out_t[:n]
                ne[:n] = out_e[:n]
                nx[:n] = out_x[:n]
                out_t, out_e, out_x = nt, ne, nx
            out_t[n] = t
            out_e[n] = ev
            out_x[n] = x
            n += 1
            for m in range(d_e):
                S[ev, x, m] += 1.0
            if n == n_target:
                break
            R = _rates(nu, alpha, S, lam)
        else:
            R = R_new
    return out_t[:n].copy(), out_e[:n].copy(), out_x[:n].copy(), status
