"""Pure-Python engagement-loop and replicator kernels.

Scalar loops in the same operation order as ``_kernels.pyx`` so both
backends produce identical floating-point results.
"""

from math import inf, log, log2, nan, sqrt

import numpy as np

POLICY_EGPF = 0
POLICY_GREEDY = 1
POLICY_RANDOM = 2


def _divergence(p, q, alpha):
    if alpha == 1.0:
        s = 0.0
        for i in range(len(p)):
            if p[i] > 0.0:
                s += p[i] * log2(p[i] / q[i])
        return s if s > 0.0 else 0.0
    s = 0.0
    for i in range(len(p)):
        if p[i] > 0.0 and q[i] > 0.0:
            s += p[i] ** alpha * q[i] ** (1.0 - alpha)
    v = log2(s) / (alpha - 1.0)
    return v if v > 0.0 else 0.0


def run_episode(
    value, channel, prior, true_type, horizon, tau_explore, tau_drift, window,
    drift_alpha, smoothing, eps_scale, policy, response_u, action_u, forced,
):
    M, L, K = channel.shape
    V = value.tolist()
    P = channel.tolist()
    mu0 = [float(x) for x in prior]
    mu = list(mu0)
    ru = response_u.tolist()
    au = action_u.tolist()
    fr = forced.tolist()
    T = int(horizon)

    actions = np.empty(T, dtype=np.int64)
    responses = np.empty(T, dtype=np.int64)
    entropies = np.empty(T)
    beliefs = np.empty((T + 1, K))
    explored = np.zeros(T, dtype=np.uint8)
    drift_stat = np.full(T, nan)
    triggered = np.zeros(T, dtype=np.uint8)
    beliefs[0] = mu

    hist_a = []
    hist_d = []
    win_start = 0
    s = smoothing if smoothing > 0.0 else (1.0 / window if window > 0 else 0.0)

    for t in range(1, T + 1):
        H = 0.0
        for k in range(K):
            if mu[k] > 0.0:
                H -= mu[k] * log2(mu[k])
        entropies[t - 1] = H

        if policy == POLICY_RANDOM:
            a = int(au[t - 1] * M)
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
            best = -inf
            best_eu = -inf
            for b in range(M):
                eu = 0.0
                for k in range(K):
                    eu += mu[k] * V[b][k]
                score = eu
                if explore:
                    ig = 0.0
                    for d in range(L):
                        pd = 0.0
                        for k in range(K):
                            pd += mu[k] * P[b][d][k]
                        for k in range(K):
                            if mu[k] > 0.0 and P[b][d][k] > 0.0:
                                ig += mu[k] * P[b][d][k] * log2(P[b][d][k] / pd)
                    score = (1.0 - eps) * eu + eps * ig
                # equal scores fall back to the higher expected payoff
                if score > best or (score == best and eu > best_eu):
                    best = score
                    best_eu = eu
                    a = b

        d = fr[t - 1]
        if d < 0:
            u = ru[t - 1]
            c = 0.0
            d = L - 1
            for j in range(L):
                c += P[a][j][true_type]
                if u < c:
                    d = j
                    break
        actions[t - 1] = a
        responses[t - 1] = d

        tot = 0.0
        for k in range(K):
            tot += mu[k] * P[a][d][k]
        if not tot > 0.0:
            raise ValueError("zero evidence: observation impossible under every type")
        for k in range(K):
            mu[k] = mu[k] * P[a][d][k] / tot

        hist_a.append(a)
        hist_d.append(d)
        if window > 0 and t - win_start >= window:
            counts = [[0.0] * L for _ in range(M)]
            for i in range(t - window, t):
                counts[hist_a[i]][hist_d[i]] += 1.0
            stat = 0.0
            for b in range(M):
                n_b = 0.0
                for j in range(L):
                    n_b += counts[b][j]
                if n_b == 0.0:
                    continue
                emp = [(counts[b][j] / n_b + s) / (1.0 + L * s) for j in range(L)]
                pred = [0.0] * L
                for j in range(L):
                    for k in range(K):
                        pred[j] += mu[k] * P[b][j][k]
                stat += (n_b / window) * _divergence(emp, pred, drift_alpha)
            drift_stat[t - 1] = stat
            if stat > tau_drift:
                triggered[t - 1] = 1
                mu = list(mu0)
                win_start = t
        beliefs[t] = mu

    return actions, responses, entropies, beliefs, explored, drift_stat, triggered


def euler_replicator(x0, fitness, dt):
    n, K = fitness.shape
    x = [float(v) for v in x0]
    f = fitness.tolist()
    out = np.empty((n + 1, K))
    out[0] = x
    for i in range(n):
        fbar = 0.0
        for k in range(K):
            fbar += x[k] * f[i][k]
        for k in range(K):
            x[k] = x[k] + dt * x[k] * (f[i][k] - fbar)
            if x[k] < 0.0:
                raise ValueError(f"step too large: share {k} negative at step {i}; reduce dt")
        s = 0.0
        for k in range(K):
            s += x[k]
        for k in range(K):
            x[k] = x[k] / s
        out[i + 1] = x
    return out
