"""Two-sample significance testing: normality gate, then rank-sum or t-tests."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import stats as _dist
from scipy.special import comb

from .. import kernels

EXACT_MAX_CELLS = 400
_MC_CHUNK = 2000


class StatResult(NamedTuple):
    statistic: float
    pvalue: float


class ProtocolError(ValueError):
    """A branch test rejected its input. ``branch`` names where it happened."""

    def __init__(self, branch: str, message: str):
        super().__init__(f"[{branch}] {message}")
        self.branch = branch


def _sample(x, name="sample") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64).ravel()
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


# -- Lilliefors ---------------------------------------------------------------

@lru_cache(maxsize=64)
def lilliefors_null(n: int, mc_iterations: int, seed: int) -> np.ndarray:
    """Sorted KS distances of ``mc_iterations`` standard-normal samples of size ``n``.

    The statistic is location/scale invariant, so one null per ``n`` serves
    every sample of that size. Chunks draw from independent child streams so
    the result does not depend on chunk evaluation order.
    """
    out = np.empty(mc_iterations)
    seq = np.random.SeedSequence(seed)
    n_chunks = -(-mc_iterations // _MC_CHUNK)
    for i, child in enumerate(seq.spawn(n_chunks)):
        lo = i * _MC_CHUNK
        hi = min(lo + _MC_CHUNK, mc_iterations)
        draws = np.random.default_rng(child).standard_normal((hi - lo, n))
        out[lo:hi] = kernels.lilliefors_stats(draws)
    out.sort()
    out.setflags(write=False)
    return out


def lilliefors_test(sample, mc_iterations: int = 10_000, seed: int = 0) -> StatResult:
    """KS normality test with estimated mean and variance; Monte Carlo p-value."""
    x = _sample(sample)
    if len(x) < 4:
        raise ValueError(f"Lilliefors test needs at least 4 observations, got {len(x)}")
    if np.ptp(x) == 0:
        raise ValueError("Lilliefors test undefined for a zero-variance sample")
    d = float(kernels.lilliefors_stats(x[None, :])[0])
    null = lilliefors_null(len(x), int(mc_iterations), int(seed))
    exceed = len(null) - np.searchsorted(null, d - 1e-12, side="left")
    return StatResult(d, (1 + exceed) / (len(null) + 1))


# -- Wilcoxon rank-sum ----------------------------------------------------------

def _rank_sum_exact_p(ranks: np.ndarray, n1: int, u1: float) -> float:
    doubled = np.rint(2 * ranks).astype(np.int64)
    counts = kernels.rank_sum_counts(doubled, n1)
    n2 = len(ranks) - n1
    sums = np.arange(len(counts))
    u = sums / 2.0 - n1 * (n1 + 1) / 2.0
    centre = n1 * n2 / 2.0
    extreme = np.abs(u - centre) >= abs(u1 - centre) - 1e-9
    return float(min(1.0, counts[extreme].sum() / comb(len(ranks), n1, exact=True)))


def wilcoxon_rank_sum(sample_a, sample_b, exact: bool | None = None) -> StatResult:
    """Two-sided rank-sum test; statistic is the Mann-Whitney U of ``sample_a``.

    Exact enumeration of the (tie-aware) permutation distribution when
    ``len(a) * len(b) <= 400``, otherwise the tie-corrected normal
    approximation with continuity correction.
    """
    a, b = _sample(sample_a, "sample_a"), _sample(sample_b, "sample_b")
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise ValueError("rank-sum test needs two nonempty samples")
    ranks = _dist.rankdata(np.concatenate([a, b]))
    u1 = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    if exact is None:
        exact = n1 * n2 <= EXACT_MAX_CELLS
    if exact:
        return StatResult(u1, _rank_sum_exact_p(ranks, n1, u1))
    big_n = n1 + n2
    _, ties = np.unique(ranks, return_counts=True)
    tie = 1.0 - float((ties ** 3 - ties).sum()) / (big_n ** 3 - big_n)
    sd = math.sqrt(tie * n1 * n2 * (big_n + 1) / 12.0)
    if sd == 0:
        return StatResult(u1, 1.0)
    z = max(abs(u1 - n1 * n2 / 2.0) - 0.5, 0.0) / sd
    return StatResult(u1, float(min(1.0, 2 * _dist.norm.sf(z))))


# -- variance and mean tests -----------------------------------------------------

def _two(sample_a, sample_b):
    a, b = _sample(sample_a, "sample_a"), _sample(sample_b, "sample_b")
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least 2 observations")
    return a, b


def levene_test(sample_a, sample_b) -> StatResult:
    """Levene's test on absolute deviations from each sample's mean."""
    a, b = _two(sample_a, sample_b)
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        raise ValueError("Levene test undefined: both samples have zero variance")
    za, zb = np.abs(a - a.mean()), np.abs(b - b.mean())
    big_n = len(a) + len(b)
    grand = (za.sum() + zb.sum()) / big_n
    between = len(a) * (za.mean() - grand) ** 2 + len(b) * (zb.mean() - grand) ** 2
    within = ((za - za.mean()) ** 2).sum() + ((zb - zb.mean()) ** 2).sum()
    if within == 0:
        stat = 0.0 if between == 0 else math.inf
    else:
        stat = (big_n - 2) * between / within
    if math.isinf(stat):
        return StatResult(stat, 0.0)
    return StatResult(float(stat), float(_dist.f.sf(stat, 1, big_n - 2)))


def student_t(sample_a, sample_b) -> StatResult:
    a, b = _two(sample_a, sample_b)
    n1, n2 = len(a), len(b)
    pooled = ((n1 - 1) * a.var(ddof=1) + (n2 - 1) * b.var(ddof=1)) / (n1 + n2 - 2)
    if pooled == 0:
        raise ValueError("t-test undefined: zero pooled variance")
    t = (a.mean() - b.mean()) / math.sqrt(pooled * (1 / n1 + 1 / n2))
    return StatResult(float(t), float(min(1.0, 2 * _dist.t.sf(abs(t), n1 + n2 - 2))))


def welch_t(sample_a, sample_b) -> StatResult:
    a, b = _two(sample_a, sample_b)
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    if va + vb == 0:
        raise ValueError("Welch test undefined: zero variance in both samples")
    t = (a.mean() - b.mean()) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    return StatResult(float(t), float(min(1.0, 2 * _dist.t.sf(abs(t), df))))


# -- protocol ---------------------------------------------------------------------

REPORT_LEVELS = (0.01, 0.05)


@dataclass
class StatTestReport:
    alpha: float
    normality: list[dict] = field(default_factory=list)
    branch: str = ""
    variance_test: dict | None = None
    statistic: float = float("nan")
    pvalue: float = float("nan")
    reject: bool = False
    reject_at: dict = field(default_factory=dict)
    trace: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def significance_protocol(sample_a, sample_b, alpha: float = 0.05, mc_iterations: int = 10_000,
                          seed: int = 0) -> StatTestReport:
    """Lilliefors on both samples; any rejection -> rank-sum test.

    Otherwise Levene decides between Welch (unequal variances) and
    Student's t.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    rep = StatTestReport(alpha=alpha)
    normal = True
    for name, x in (("a", sample_a), ("b", sample_b)):
        try:
            res = lilliefors_test(x, mc_iterations, seed)
        except ValueError as exc:
            raise ProtocolError("normality", f"sample {name}: {exc}") from exc
        rejected = res.pvalue < alpha
        normal &= not rejected
        rep.normality.append({"sample": name, "statistic": res.statistic, "pvalue": res.pvalue,
                              "normal_rejected": bool(rejected)})
        rep.trace.append(f"lilliefors[{name}] D={res.statistic:.6g} p={res.pvalue:.6g} "
                         f"-> {'reject' if rejected else 'keep'} normality")
    if not normal:
        rep.branch = "wilcoxon"
        rep.trace.append("normality rejected -> wilcoxon rank-sum")
        try:
            final = wilcoxon_rank_sum(sample_a, sample_b)
        except ValueError as exc:
            raise ProtocolError("wilcoxon", str(exc)) from exc
    else:
        try:
            lev = levene_test(sample_a, sample_b)
        except ValueError as exc:
            raise ProtocolError("levene", str(exc)) from exc
        hetero = lev.pvalue < alpha
        rep.variance_test = {"test": "levene", "statistic": lev.statistic, "pvalue": lev.pvalue,
                             "equal_variance_rejected": bool(hetero)}
        rep.branch = "welch" if hetero else "student"
        rep.trace.append(f"levene W={lev.statistic:.6g} p={lev.pvalue:.6g} -> {rep.branch}")
        try:
            final = (welch_t if hetero else student_t)(sample_a, sample_b)
        except ValueError as exc:
            raise ProtocolError(rep.branch, str(exc)) from exc
    rep.statistic, rep.pvalue = final
    rep.reject = bool(final.pvalue < alpha)
    rep.reject_at = {f"{lvl:g}": bool(final.pvalue < lvl) for lvl in REPORT_LEVELS}
    rep.trace.append(f"{rep.branch} stat={final.statistic:.6g} p={final.pvalue:.6g} "
                     f"-> {'reject' if rep.reject else 'accept'} H0 at alpha={alpha:g}")
    return rep
