"""
Admissible sequences, gamma_2 upper estimates and chain diagnostics
"""

import math
from typing import Optional, Union

import numpy as np
import structlog
from scipy.spatial.distance import cdist

from lqlab.core.config import settings
from lqlab.core.exceptions import InvalidArgumentError
from lqlab.models.chaining import (
    AdmissibleSequence,
    ChainDiagnostics,
    ChainingEstimate,
    ChainingMethod,
)
from lqlab.models.ensemble import EnsembleSpec
from lqlab.models.index_set import IndexSetSpec, Metric
from lqlab.services.index_sets import covering_number_log_bound, l2_diameter

logger = structlog.get_logger()

MAX_LEVEL = 5

_ROW_CHUNK = 512


def critical_time(N: int) -> int:
    """The integer m with 2^m <= N < 2^{m+1}."""
    if N < 1:
        raise InvalidArgumentError("N must be at least 1")
    return int(N).bit_length() - 1


def level_cardinality(n: int) -> int:
    """N_n = 2^{2^n} for n >= 1 and |T_0| = 1."""
    if n < 0:
        raise InvalidArgumentError("level must be nonnegative")
    return 1 if n == 0 else 2 ** (2**n)


def _farthest_point_order(points: np.ndarray) -> np.ndarray:
    """Insertion order starting at the point nearest the centroid."""
    n = points.shape[0]
    centroid = points.mean(axis=0)
    first = int(np.argmin(np.linalg.norm(points - centroid, axis=1)))
    order = np.empty(n, dtype=np.int64)
    order[0] = first
    gap = np.linalg.norm(points - points[first], axis=1)
    gap[first] = -1.0
    for k in range(1, n):
        # argmax returns the lowest index among ties
        nxt = int(np.argmax(gap))
        order[k] = nxt
        gap = np.minimum(gap, np.linalg.norm(points - points[nxt], axis=1))
        gap[nxt] = -1.0
    return order


def _nearest_in_level(points: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Index of the nearest member per point, ties to the lowest point index."""
    members = np.sort(members)
    out = np.empty(points.shape[0], dtype=np.int64)
    for start in range(0, points.shape[0], _ROW_CHUNK):
        block = cdist(points[start : start + _ROW_CHUNK], points[members])
        out[start : start + _ROW_CHUNK] = members[np.argmin(block, axis=1)]
    return out


def build_admissible_sequence(
    points: np.ndarray,
    max_level: int = MAX_LEVEL,
    metric: Metric = Metric.L2,
    metric_scale: float = 1.0,
) -> AdmissibleSequence:
    """Greedy farthest-point admissible sequence over a finite point cloud.

    Level n holds the first min(N_n, |points|) points of the insertion order.
    Construction stops at the first level containing every point.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] == 0:
        raise InvalidArgumentError("admissible sequence needs at least one point")
    if not 0 <= max_level <= MAX_LEVEL:
        raise InvalidArgumentError(f"max_level must lie in [0, {MAX_LEVEL}]")

    count = points.shape[0]
    order = _farthest_point_order(points)
    sizes: list[int] = []
    for n in range(max_level + 1):
        sizes.append(min(level_cardinality(n), count))
        if sizes[-1] == count:
            break
    if sizes[-1] < count:
        raise InvalidArgumentError(
            f"{count} points do not fit in {max_level + 1} levels; raise max_level"
        )

    projections = [_nearest_in_level(points, order[:size]) for size in sizes]
    return AdmissibleSequence(
        points=points,
        order=order,
        sizes=sizes,
        projections=projections,
        metric=metric,
        metric_scale=metric_scale,
    )


def _level_distances(seq: AdmissibleSequence, points: np.ndarray) -> np.ndarray:
    """(levels x points) matrix of d(v, T_n)."""
    rows = [
        np.linalg.norm(points - seq.points[proj], axis=1) for proj in seq.projections
    ]
    return seq.metric_scale * np.vstack(rows)


def gamma2_upper_from_sequence(
    seq: AdmissibleSequence, points: Optional[np.ndarray] = None
) -> ChainingEstimate:
    """sup_v sum_n 2^{n/2} d(v, T_n) for the given sequence."""
    if points is None:
        points = seq.points
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape != seq.points.shape:
        raise InvalidArgumentError("points do not match the sequence's working set")
    weights = 2.0 ** (np.arange(len(seq.sizes)) / 2.0)
    totals = weights @ _level_distances(seq, points)
    return ChainingEstimate(
        value=float(totals.max()),
        method=ChainingMethod.SEQUENCE,
        metric=seq.metric,
        levels=seq.depth,
    )


def gamma2_upper_dudley(
    index_set: IndexSetSpec,
    metric: Metric = Metric.L2,
    eps_levels: Optional[int] = None,
    ensemble: Optional[EnsembleSpec] = None,
) -> ChainingEstimate:
    """Dyadic entropy sum over eps = 2^{-k} diam, k = 0..eps_levels."""
    eps_levels = settings.DUDLEY_EPS_LEVELS if eps_levels is None else eps_levels
    if eps_levels < 2:
        raise InvalidArgumentError("eps_levels must be at least 2")
    if metric == Metric.PSI2_PROXY:
        if ensemble is None:
            raise InvalidArgumentError("psi2_proxy metric needs an ensemble")
        scale = ensemble.psi2_constant
    else:
        scale = 1.0

    diam = l2_diameter(index_set)
    grid = [diam * 2.0**-k for k in range(eps_levels + 1)]
    if diam == 0.0:
        return ChainingEstimate(
            value=0.0, method=ChainingMethod.DUDLEY, metric=metric, eps_grid=[]
        )
    value = sum(
        eps * math.sqrt(covering_number_log_bound(index_set, eps)) for eps in grid
    )
    return ChainingEstimate(
        value=scale * value,
        method=ChainingMethod.DUDLEY,
        metric=metric,
        eps_grid=[scale * eps for eps in grid],
    )


def chain_diagnostics(
    seq: AdmissibleSequence, v: Union[int, np.ndarray], N: int
) -> ChainDiagnostics:
    """Chain of v anchored at the origin, split at the critical time of N.

    Summand 0 is d(pi_0 v, 0); summand n >= 1 is 2^{n/2} d(pi_n v, pi_{n-1} v).
    """
    if isinstance(v, (int, np.integer)):
        index = int(v)
        if not 0 <= index < seq.points.shape[0]:
            raise InvalidArgumentError(f"point index {index} out of range")
    else:
        hits = np.nonzero(np.all(seq.points == np.asarray(v, dtype=np.float64), axis=1))[0]
        if hits.size == 0:
            raise InvalidArgumentError("v is not a working point of the sequence")
        index = int(hits[0])

    chain = [seq.points[proj[index]] for proj in seq.projections]
    summands = [seq.metric_scale * float(np.linalg.norm(chain[0]))]
    for n in range(1, len(chain)):
        step = float(np.linalg.norm(chain[n] - chain[n - 1]))
        summands.append(2.0 ** (n / 2.0) * seq.metric_scale * step)

    m_star = critical_time(N)
    initial = float(sum(summands[: m_star + 1]))
    terminal = float(sum(summands[m_star + 1 :]))
    return ChainDiagnostics(
        critical_time=m_star,
        initial_sum=initial,
        terminal_sum=terminal,
        total=initial + terminal,
        summands=summands,
    )
