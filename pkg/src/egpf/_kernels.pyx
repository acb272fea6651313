# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled engagement-loop and replicator kernels.

Mirrors ``_kernels_py`` operation for operation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, log2, pow, sqrt, INFINITY, NAN

cnp.import_array()

cdef enum:
    POLICY_EGPF = 0
    POLICY_GREEDY = 1
    POLICY_RANDOM = 2


cdef double _divergence(const double[::1] p, const double[::1] q, Py_ssize_t n, double alpha) noexcept nogil:
    cdef double s = 0.0, v
    cdef Py_ssize_t i
    if alpha == 1.0:
        for i in range(n):
            if p[i] > 0.0:
                s += p[i] * log2(p[i] / q[i])
        return s if s > 0.0 else 0.0
    for i in range(n):
        if p[i] > 0.0 and q[i] > 0.0:
            s += pow(p[i], alpha) * pow(q[i], 1.0 - alpha)
    v = log2(s) / (alpha - 1.0)
    return v if v > 0.0 else 0.0


def run_episode(
    const double[:, ::1] value, const double[:, :, ::1] channel, const double[::1] prior,
    Py_ssize_t true_type, Py_ssize_t horizon, double tau_explore, double tau_drift,
    Py_ssize_t window, double drift_alpha, double smoothing, double eps_scale,
    int policy, const double[::1] response_u, const double[::1] action_u, const cnp.int64_t[::1] forced,
):
    cdef Py_ssize_t M = channel.shape[0], L = channel.shape[1], K = channel.shape[2]
    cdef Py_ssize_t T = horizon
    cdef Py_ssize_t t, k, b, d, j, i, a, win_start = 0
    cdef double H, eps, best, best_eu, eu, score, ig, pd, u, c, tot, stat, n_b, s
    cdef bint explore

    actions_arr = np.empty(T, dtype=np.int64)
    responses_arr = np.empty(T, dtype=np.int64)
    entropies_arr = np.empty(T)
    beliefs_arr = np.empty((T + 1, K))
    explored_arr = np.zeros(T, dtype=np.uint8)
    drift_arr = np.full(T, np.nan)
    triggered_arr = np.zeros(T, dtype=np.uint8)
    cdef cnp.int64_t[::1] actions = actions_arr
    cdef cnp.int64_t[::1] responses = responses_arr
    cdef double[::1] entropies = entropies_arr
    cdef double[:, ::1] beliefs = beliefs_arr
    cdef cnp.uint8_t[::1] explored = explored_arr
    cdef double[::1] drift_stat = drift_arr
    cdef cnp.uint8_t[::1] triggered = triggered_arr

    cdef double[::1] mu = np.array(prior, dtype=np.float64)
    cdef double[:, ::1] counts = np.zeros((M, L))
    cdef double[::1] emp = np.zeros(L)
    cdef double[::1] pred = np.zeros(L)

    if smoothing > 0.0:
        s = smoothing
    elif window > 0:
        s = 1.0 / window
    else:
        s = 0.0

    for k in range(K):
        beliefs[0, k] = mu[k]

    for t in range(1, T + 1):
        H = 0.0
        for k in range(K):
            if mu[k] > 0.0:
                H -= mu[k] * log2(mu[k])
        entropies[t - 1] = H

        if policy == POLICY_RANDOM:
            a = <Py_ssize_t>(action_u[t - 1] * M)
            if a >= M:
                a = M - 1
        else:
            explore = policy == POLICY_EGPF and H > tau_explore
            eps = 0.0
            if explore:
                eps = eps_scale * sqrt(K * log(t + 1.0) / t)
                if eps > 1.0:
                    eps = 1.0
                explored[t - 1] = 1
            a = 0
            best = -INFINITY
            best_eu = -INFINITY
            for b in range(M):
                eu = 0.0
                for k in range(K):
                    eu += mu[k] * value[b, k]
                score = eu
                if explore:
                    ig = 0.0
                    for d in range(L):
                        pd = 0.0
                        for k in range(K):
                            pd += mu[k] * channel[b, d, k]
                        for k in range(K):
                            if mu[k] > 0.0 and channel[b, d, k] > 0.0:
                                ig += mu[k] * channel[b, d, k] * log2(channel[b, d, k] / pd)
                    score = (1.0 - eps) * eu + eps * ig
                # equal scores fall back to the higher expected payoff
                if score > best or (score == best and eu > best_eu):
                    best = score
                    best_eu = eu
                    a = b

        d = forced[t - 1]
        if d < 0:
            u = response_u[t - 1]
            c = 0.0
            d = L - 1
            for j in range(L):
                c += channel[a, j, true_type]
                if u < c:
                    d = j
                    break
        actions[t - 1] = a
        responses[t - 1] = d

        tot = 0.0
        for k in range(K):
            tot += mu[k] * channel[a, d, k]
        if not tot > 0.0:
            raise ValueError("zero evidence: observation impossible under every type")
        for k in range(K):
            mu[k] = mu[k] * channel[a, d, k] / tot

        if window > 0 and t - win_start >= window:
            counts[:, :] = 0.0
            for i in range(t - window, t):
                counts[actions[i], responses[i]] += 1.0
            stat = 0.0
            for b in range(M):
                n_b = 0.0
                for j in range(L):
                    n_b += counts[b, j]
                if n_b == 0.0:
                    continue
                for j in range(L):
                    emp[j] = (counts[b, j] / n_b + s) / (1.0 + L * s)
                    pred[j] = 0.0
                for j in range(L):
                    for k in range(K):
                        pred[j] += mu[k] * channel[b, j, k]
                stat += (n_b / window) * _divergence(emp, pred, L, drift_alpha)
            drift_stat[t - 1] = stat
            if stat > tau_drift:
                triggered[t - 1] = 1
                for k in range(K):
                    mu[k] = prior[k]
                win_start = t
        for k in range(K):
            beliefs[t, k] = mu[k]

    return actions_arr, responses_arr, entropies_arr, beliefs_arr, explored_arr, drift_arr, triggered_arr


def euler_replicator(const double[::1] x0, const double[:, ::1] fitness, double dt):
    cdef Py_ssize_t n = fitness.shape[0], K = fitness.shape[1], i, k
    cdef double fbar, s
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    out_arr = np.empty((n + 1, K))
    cdef double[:, ::1] out = out_arr
    for k in range(K):
        out[0, k] = x[k]
    for i in range(n):
        fbar = 0.0
        for k in range(K):
            fbar += x[k] * fitness[i, k]
        for k in range(K):
            x[k] = x[k] + dt * x[k] * (fitness[i, k] - fbar)
            if x[k] < 0.0:
                raise ValueError(f"step too large: share {k} negative at step {i}; reduce dt")
        s = 0.0
        for k in range(K):
            s += x[k]
        for k in range(K):
            x[k] = x[k] / s
            out[i + 1, k] = x[k]
    return out_arr
