"""Pure-numpy kernels. Must agree with ``_numba`` to floating tolerance."""
import numpy as np
from scipy.special import ndtr


def similarity_row(target, ages, intensive, age_weight, jaccard_weight):
    gap = np.abs(ages - ages[target])
    sim_age = np.where(gap == 0, 1.0, np.where(gap == 1, 0.5, 0.0))
    m = intensive.astype(np.int64)
    inter = m @ m[target]
    union = m.sum(axis=1) + m[target].sum() - inter
    jac = np.divide(inter, union, out=np.zeros(len(ages)), where=union > 0)
    return age_weight * sim_age + jaccard_weight * jac


def common_played(played, target):
    p = played.astype(np.int64)
    return p @ p[target]


def interest_scores(sims, counts):
    if len(sims) == 0:
        return np.zeros(counts.shape[1])
    return (sims @ counts.astype(np.float64)) / len(sims)


def lilliefors_stats(samples):
    m, n = samples.shape
    x = np.sort(samples, axis=1)
    mu = x.mean(axis=1, keepdims=True)
    sd = x.std(axis=1, ddof=1, keepdims=True)
    cdf = ndtr((x - mu) / sd)
    i = np.arange(1, n + 1)
    d_plus = (i / n - cdf).max(axis=1)
    d_minus = (cdf - (i - 1) / n).max(axis=1)
    return np.maximum(d_plus, d_minus)


def rank_sum_counts(doubled_ranks, n):
    total = int(doubled_ranks.sum())
    dp = np.zeros((n + 1, total + 1))
    dp[0, 0] = 1.0
    for v in doubled_ranks:
        v = int(v)
        dp[1:, v:] = dp[1:, v:] + dp[:-1, : total + 1 - v]
    return dp[n]
