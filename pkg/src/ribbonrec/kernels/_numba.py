"""Numba-compiled kernels. Same signatures and results as ``_numpy``."""
import math

import numpy as np
from numba import njit

_SQRT2 = math.sqrt(2.0)


@njit(cache=True)
def similarity_row(target, ages, intensive, age_weight, jaccard_weight):
    n_children, n_apps = intensive.shape
    out = np.zeros(n_children)
    t_size = 0
    for a in range(n_apps):
        if intensive[target, a]:
            t_size += 1
    t_age = ages[target]
    for c in range(n_children):
        gap = abs(ages[c] - t_age)
        if gap == 0:
            s_age = 1.0
        elif gap == 1:
            s_age = 0.5
        else:
            s_age = 0.0
        inter = 0
        size = 0
        for a in range(n_apps):
            if intensive[c, a]:
                size += 1
                if intensive[target, a]:
                    inter += 1
        union = size + t_size - inter
        jac = inter / union if union > 0 else 0.0
        out[c] = age_weight * s_age + jaccard_weight * jac
    return out


@njit(cache=True)
def common_played(played, target):
    n_children, n_apps = played.shape
    out = np.zeros(n_children, dtype=np.int64)
    for c in range(n_children):
        k = 0
        for a in range(n_apps):
            if played[c, a] and played[target, a]:
                k += 1
        out[c] = k
    return out


@njit(cache=True)
def interest_scores(sims, counts):
    k, n_apps = counts.shape
    out = np.zeros(n_apps)
    if k == 0:
        return out
    for i in range(k):
        for a in range(n_apps):
            out[a] += sims[i] * counts[i, a]
    for a in range(n_apps):
        out[a] /= k
    return out


@njit(cache=True)
def lilliefors_stats(samples):
    m, n = samples.shape
    out = np.empty(m)
    for r in range(m):
        x = np.sort(samples[r])
        mu = x.mean()
        ss = 0.0
        for i in range(n):
            ss += (x[i] - mu) ** 2
        sd = math.sqrt(ss / (n - 1))
        d = 0.0
        for i in range(n):
            cdf = 0.5 * (1.0 + math.erf((x[i] - mu) / sd / _SQRT2))
            hi = (i + 1) / n - cdf
            lo = cdf - i / n
            if hi > d:
                d = hi
            if lo > d:
                d = lo
        out[r] = d
    return out


@njit(cache=True)
def rank_sum_counts(doubled_ranks, n):
    total = 0
    for v in doubled_ranks:
        total += v
    dp = np.zeros((n + 1, total + 1))
    dp[0, 0] = 1.0
    seen = 0
    for v in doubled_ranks:
        seen += 1
        for k in range(min(seen, n), 0, -1):
            for s in range(total, v - 1, -1):
                dp[k, s] += dp[k - 1, s - v]
    return dp[n]
