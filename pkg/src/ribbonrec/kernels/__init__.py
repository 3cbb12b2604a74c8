"""Hot numeric kernels, dispatched to numba or numpy per ``RIBBONREC_NUMBA``.

All kernels take plain numpy arrays:

``similarity_row(target, ages, intensive, age_weight, jaccard_weight)``
    Weighted age/Jaccard similarity of child ``target`` to every child.
``common_played(played, target)``
    Number of played apps each child shares with ``target``.
``interest_scores(sims, counts)``
    Similarity-weighted mean of neighbour play counts per app.
``lilliefors_stats(samples)``
    KS distance of each row to a normal fitted to that row.
``rank_sum_counts(doubled_ranks, n)``
    Number of size-``n`` subsets attaining each doubled rank sum.
"""
import numpy as np

from .. import _accel
from . import _numpy

if _accel.USE_NUMBA:
    from . import _numba as _impl
else:
    _impl = _numpy

BACKEND = "numba" if _impl is not _numpy else "numpy"


def similarity_row(target, ages, intensive, age_weight=0.4, jaccard_weight=0.6):
    return _impl.similarity_row(
        int(target),
        np.ascontiguousarray(ages, dtype=np.int64),
        np.ascontiguousarray(intensive, dtype=np.bool_),
        float(age_weight),
        float(jaccard_weight),
    )


def common_played(played, target):
    return _impl.common_played(np.ascontiguousarray(played, dtype=np.bool_), int(target))


def interest_scores(sims, counts):
    return _impl.interest_scores(
        np.ascontiguousarray(sims, dtype=np.float64),
        np.ascontiguousarray(counts, dtype=np.int64),
    )


def lilliefors_stats(samples):
    return _impl.lilliefors_stats(np.ascontiguousarray(samples, dtype=np.float64))


def rank_sum_counts(doubled_ranks, n):
    return _impl.rank_sum_counts(np.ascontiguousarray(doubled_ranks, dtype=np.int64), int(n))
