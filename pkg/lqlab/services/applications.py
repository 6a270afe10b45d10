"""
Restricted isometry certification and random section experiments
"""

import math
from typing import Optional, Sequence

import numpy as np
import structlog

from lqlab.core.config import experiment_defaults
from lqlab.core.exceptions import (
    InvalidArgumentError,
    InvalidQueryError,
    UnsupportedOperationError,
)
from lqlab.models.applications import (
    DmBound,
    EquivalenceReport,
    FixedPointResult,
    RipCertificate,
    RipQuery,
    RipVerdict,
    SectionEstimate,
    conjugate_exponent,
)
from lqlab.models.ensemble import EnsembleFamily, EnsembleSpec, SampleBatch
from lqlab.models.index_set import IndexSetSpec, Net
from lqlab.services.ensembles import (
    derive_seed,
    gaussian_lq_constant,
    make_generator,
    population_lq_norms,
    sample_batch,
)
from lqlab.services.index_sets import (
    epsilon_net,
    intersect_lq_sphere,
    l2_diameter,
    l2_radius,
    mean_width,
    support_function,
    support_point,
)
from lqlab.services.process import maximize_over_set, search_net

logger = structlog.get_logger()

_DUAL_STREAM = 0x4455414C


def _empirical_lq_norms(rows: np.ndarray, vectors: np.ndarray, q: float) -> np.ndarray:
    """N^{-1/q} ||X v||_q per vector."""
    return np.mean(np.abs(rows @ vectors.T) ** q, axis=0) ** (1.0 / q)


def _audit_base(query: RipQuery, radius: float) -> np.ndarray:
    """Base vectors of cone(F(R)): a net of K on the L^q sphere of radius R.

    Without a closed-form L^q sphere (non-Gaussian X) the audit uses a net of K
    itself; every ratio is scale invariant, so only directions matter.
    """
    if query.ensemble.family == EnsembleFamily.GAUSSIAN:
        target = intersect_lq_sphere(query.set, radius, query.q, query.ensemble)
        if target.is_empty:
            raise InvalidQueryError(
                f"K meets no L^{query.q:g} sphere of radius {radius:g}; cone(F(R)) is empty"
            )
    else:
        target = query.set
    diam = l2_diameter(target)
    eps = experiment_defaults.NET_EPS_FRACTION * diam if diam > 0 else 1.0
    net = epsilon_net(target, eps, seed=query.seed, max_points=query.audit_vectors)
    base = net.points[np.linalg.norm(net.points, axis=1) > 0]
    if base.shape[0] == 0:
        raise InvalidQueryError("cone(F(R)) contains only the origin")
    return base


def _population_norms(query: RipQuery, vectors: np.ndarray) -> np.ndarray:
    return population_lq_norms(
        query.ensemble, vectors, query.q, mc_budget=query.mc_budget, seed=query.seed
    )


def rip_certify(
    query: RipQuery,
    window: float = experiment_defaults.RATIO_WINDOW,
    batch: Optional[SampleBatch] = None,
) -> RipCertificate:
    """Check c <= N^{-1/q} ||X v||_q / ||<X, v>||_{L^q} <= 1/c over audited cone vectors.

    ``batch`` replaces the sampled design matrix (external matrices).
    """
    if not 0.0 < window < 1.0:
        raise InvalidArgumentError("ratio window must lie in (0, 1)")
    if query.set.dimension != query.ensemble.dimension:
        raise InvalidArgumentError("ensemble and index set dimensions differ")
    if batch is None:
        batch = sample_batch(query.ensemble, query.N, query.seed, 0)
    elif batch.dimension != query.set.dimension:
        raise InvalidArgumentError("design matrix and index set dimensions differ")
    design_seed = derive_seed(query.seed, 0)

    if query.radius == "solve":
        solved = fixed_point_radius(
            query.set,
            query.q,
            batch.n,
            query.theta,
            query.mc_budget,
            query.seed,
            ensemble=query.ensemble,
        )
        radius = solved.radius
        if radius == 0.0:
            # every positive R is feasible; audit the outermost sphere meeting K
            radius = gaussian_lq_constant(query.q) * l2_radius(query.set)
    else:
        radius = float(query.radius)

    if l2_radius(query.set) == 0.0:
        logger.info("Vacuous certification", kind=query.set.kind.value)
        return RipCertificate(
            verdict=RipVerdict.CERTIFIED,
            window=window,
            worst_lower=1.0,
            worst_upper=1.0,
            audited=0,
            vacuous=True,
            radius=radius,
            design_seed=design_seed,
            query=query,
        )

    base = _audit_base(query, radius)
    scales = np.asarray(experiment_defaults.CONE_SCALES)
    vectors = (scales[:, None, None] * base[None, :, :]).reshape(-1, base.shape[1])
    ratios = _empirical_lq_norms(batch.rows, vectors, query.q) / _population_norms(
        query, vectors
    )

    lower_index = int(np.argmin(ratios))
    upper_index = int(np.argmax(ratios))
    worst_lower, worst_upper = float(ratios[lower_index]), float(ratios[upper_index])
    certified = worst_lower >= window and worst_upper <= 1.0 / window

    violating_vector = None
    violating_ratio = None
    if not certified:
        # report the side with the larger multiplicative violation
        low_gap = window / worst_lower if worst_lower > 0 else math.inf
        high_gap = worst_upper * window
        index = lower_index if low_gap >= high_gap else upper_index
        violating_vector = vectors[index].copy()
        violating_ratio = float(ratios[index])

    certificate = RipCertificate(
        verdict=RipVerdict.CERTIFIED if certified else RipVerdict.VIOLATED,
        window=window,
        worst_lower=worst_lower,
        worst_upper=worst_upper,
        audited=int(vectors.shape[0]),
        radius=radius,
        violating_vector=violating_vector,
        violating_ratio=violating_ratio,
        design_seed=design_seed,
        query=query,
    )
    logger.info(
        "Certification finished",
        verdict=certificate.verdict.value,
        worst_lower=worst_lower,
        worst_upper=worst_upper,
        audited=certificate.audited,
        N=batch.n,
    )
    return certificate


def verify_certificate(certificate: RipCertificate, batch: SampleBatch) -> float:
    """Recompute the ratio at a certificate's violating vector."""
    if certificate.violating_vector is None:
        raise InvalidArgumentError("certificate has no violating vector")
    v = np.asarray(certificate.violating_vector)[None, :]
    empirical = _empirical_lq_norms(batch.rows, v, certificate.query.q)
    return float(empirical[0] / _population_norms(certificate.query, v)[0])


def rip_failure_exponent(N: int, q: float, c: float = 1.0) -> float:
    """c N^{min(1, 2/q)}; certification fails with probability at most exp(-this)."""
    if N < 1 or q < 1:
        raise InvalidArgumentError("need N >= 1 and q >= 1")
    return c * N ** min(1.0, 2.0 / q)


def fixed_point_radius(
    K: IndexSetSpec,
    q: float,
    N: int,
    theta: float = 1.0,
    mc_budget: int = 2000,
    seed: int = 0,
    ensemble: Optional[EnsembleSpec] = None,
) -> FixedPointResult:
    """Smallest R with l*(K on the L^q sphere of radius R) <= theta R N^{min(1/2, 1/q)}.

    Widths use estimate + 2 se with the same Gaussian draws at every R. Feasibility
    is monotone in R for star-shaped K, so bisection applies.
    """
    if ensemble is None:
        ensemble = EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=K.dimension)
    if ensemble.family != EnsembleFamily.GAUSSIAN:
        raise UnsupportedOperationError("fixed-point radius needs a Gaussian ensemble")
    if theta <= 0 or N < 1:
        raise InvalidArgumentError("need theta > 0 and N >= 1")

    rate = theta * N ** min(0.5, 1.0 / q)
    se_multiplier = experiment_defaults.WIDTH_SE_MULTIPLIER

    def width(R: float) -> float:
        section = intersect_lq_sphere(K, R, q, ensemble)
        if section.is_empty:
            return 0.0
        estimate = mean_width(section, mc_budget, seed)
        return estimate.value + se_multiplier * estimate.std_error

    upper = gaussian_lq_constant(q) * l2_radius(K)
    if upper == 0.0:
        return FixedPointResult(radius=0.0, feasible=True, upper_bracket=0.0, iterations=0)

    floor = experiment_defaults.FIXED_POINT_FLOOR * upper
    floor_width = width(floor)
    if floor_width <= rate * floor:
        logger.info("Fixed-point radius is zero", q=q, N=N, theta=theta)
        return FixedPointResult(
            radius=0.0,
            feasible=True,
            upper_bracket=upper,
            iterations=0,
            width_at_radius=floor_width,
        )
    upper_width = width(upper)
    if upper_width > rate * upper:
        logger.warning("Fixed-point condition infeasible on the bracket", q=q, N=N, theta=theta)
        return FixedPointResult(
            radius=upper,
            feasible=False,
            upper_bracket=upper,
            iterations=0,
            width_at_radius=upper_width,
        )

    lo, hi, hi_width = floor, upper, upper_width
    iterations = 0
    while iterations < experiment_defaults.FIXED_POINT_ITERATIONS and hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        mid_width = width(mid)
        if mid_width <= rate * mid:
            hi, hi_width = mid, mid_width
        else:
            lo = mid
        iterations += 1
    logger.info("Fixed-point radius found", radius=hi, iterations=iterations, q=q, N=N)
    return FixedPointResult(
        radius=hi,
        feasible=True,
        upper_bracket=upper,
        iterations=iterations,
        width_at_radius=hi_width,
    )


class NormObjective:
    """v -> ||X v||_q with its (sub)gradient."""

    def __init__(self, rows: np.ndarray, q: float):
        self.rows = rows
        self.q = q

    def values(self, points: np.ndarray) -> np.ndarray:
        z = np.abs(self.rows @ np.atleast_2d(points).T)
        if self.q == 1.0:
            return z.sum(axis=0)
        return np.sum(z**self.q, axis=0) ** (1.0 / self.q)

    def gradient(self, v: np.ndarray) -> np.ndarray:
        z = self.rows @ v
        if self.q == 1.0:
            return np.sign(z) @ self.rows
        norm = float(np.sum(np.abs(z) ** self.q) ** (1.0 / self.q))
        if norm == 0.0:
            return np.zeros_like(v)
        weights = np.sign(z) * (np.abs(z) / norm) ** (self.q - 1.0)
        return weights @ self.rows


def _dual_direction(w: np.ndarray, p: float) -> np.ndarray:
    """argmax of <lambda, w> over ||lambda||_p <= 1."""
    if math.isinf(p):
        return np.where(w >= 0, 1.0, -1.0)
    q = conjugate_exponent(p)
    norm = float(np.sum(np.abs(w) ** q) ** (1.0 / q))
    if norm == 0.0:
        out = np.zeros_like(w)
        out[0] = 1.0
        return out
    return np.sign(w) * (np.abs(w) / norm) ** (q - 1.0)


def _sample_lp_sphere(n: int, N: int, p: float, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, N))
    if math.isinf(p):
        return g / np.abs(g).max(axis=1, keepdims=True)
    return g / (np.sum(np.abs(g) ** p, axis=1, keepdims=True) ** (1.0 / p))


def _dual_side(
    rows: np.ndarray, K: IndexSetSpec, p: float, samples: int, steps: int, seed: int
) -> float:
    """sup over ||lambda||_p = 1 of ||X^T lambda||_{K polar}, by sampling and ascent."""
    rng = make_generator(seed, _DUAL_STREAM)
    lambdas = _sample_lp_sphere(samples, rows.shape[0], p, rng)
    values = support_function(K, lambdas @ rows)
    best = float(values.max())
    lam = lambdas[int(np.argmax(values))]
    for _ in range(steps):
        v = support_point(K, rows.T @ lam)
        lam = _dual_direction(rows @ v, p)
        value = float(support_function(K, (lam @ rows)[None, :])[0])
        if value <= best:
            break
        best = value
    return best


def section_diameter(
    batch: SampleBatch,
    K: IndexSetSpec,
    p: float,
    net: Optional[Net] = None,
    net_max_points: int = 256,
    restarts: int = 4,
    steps: int = 200,
    dual_samples: int = 256,
    seed: int = 0,
) -> SectionEstimate:
    """Lower estimate of sup_{v in K} ||X v||_q with q = p / (p - 1).

    This equals the l_p diameter sup over ||lambda||_p = 1 of ||X^T lambda||_{K polar};
    the lambda side is evaluated independently as ``dual_value``. That side
    starts from ``dual_samples`` random points of the l_p sphere in R^N and
    ascends from the best one, so it is also a lower estimate and can sit a
    few percent below ``value`` when N is large.
    """
    if p <= 1:
        raise InvalidArgumentError("p must exceed 1")
    if batch.dimension != K.dimension:
        raise InvalidArgumentError("design matrix and set dimensions differ")
    q = conjugate_exponent(p)
    if net is None:
        net = search_net(K, max_points=net_max_points, seed=seed)
    estimate = maximize_over_set(
        K, NormObjective(batch.rows, q), net, restarts=restarts, steps=steps, convex=True
    )
    dual_value = _dual_side(batch.rows, K, p, dual_samples, steps, seed)
    return SectionEstimate(
        value=estimate.value,
        argmax=estimate.argmax,
        dual_value=dual_value,
        net_size=net.size,
        improvement=estimate.audit.improvement,
    )


def section_lower_estimate(
    batch: SampleBatch, K: IndexSetSpec, p: float, samples: int = 256, seed: int = 0
) -> float:
    """min over sampled lambda on the l_p sphere of ||X^T lambda||_{K polar}."""
    if p <= 1:
        raise InvalidArgumentError("p must exceed 1")
    rng = make_generator(seed, _DUAL_STREAM, 1)
    lambdas = _sample_lp_sphere(samples, batch.n, p, rng)
    return float(support_function(K, lambdas @ batch.rows).min())


def dm_upper_bound(
    ellstar: float, diam: float, N: int, p: float, C: float = 1.0, c: float = 1.0
) -> DmBound:
    """Bound on the l_p diameter of random sections and its critical dimension.

    p <= 2 gives C l*; p > 2 gives C l*^{2(p-1)/p} diam^{(2-p)/p}. The
    threshold is c (l*/diam)^{min(2, p/(p-1))}.
    """
    if p <= 1:
        raise InvalidArgumentError("p must exceed 1")
    if ellstar < 0 or diam < 0:
        raise InvalidArgumentError("ellstar and diam must be nonnegative")
    if p <= 2:
        value = C * ellstar
        regime = "p_le_2"
    elif diam == 0.0:
        value = 0.0
        regime = "p_gt_2"
    elif math.isinf(p):
        value = C * ellstar**2 / diam
        regime = "p_gt_2"
    else:
        value = C * ellstar ** (2.0 * (p - 1.0) / p) * diam ** ((2.0 - p) / p)
        regime = "p_gt_2"
    threshold = math.inf if diam == 0.0 else c * (ellstar / diam) ** min(2.0, conjugate_exponent(p))
    return DmBound(
        value=value, dimension_threshold=threshold, regime=regime, within_threshold=N <= threshold
    )


def dm_lower_dimension_threshold(ellstar: float, diam: float, p: float, c: float = 1.0) -> float:
    """c (l*/diam)^{(p+2)/p}, the Gaussian lower-bound condition for p > 2."""
    if p <= 2:
        raise InvalidArgumentError("lower threshold applies to p > 2")
    if diam <= 0:
        raise InvalidArgumentError("diam must be positive")
    exponent = 1.0 if math.isinf(p) else (p + 2.0) / p
    return c * (ellstar / diam) ** exponent


def lq_l2_equivalence_check(
    spec: EnsembleSpec,
    q: float,
    vectors: Sequence[Sequence[float]] | np.ndarray,
    mc_budget: int = 20000,
    seed: int = 0,
) -> EquivalenceReport:
    """Empirical L^2 / L^q norm equivalence constants over the given directions."""
    if q < 1:
        raise InvalidArgumentError("q must be at least 1")
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    vectors = vectors[np.linalg.norm(vectors, axis=1) > 0]
    if vectors.shape[0] == 0:
        raise InvalidArgumentError("need at least one nonzero vector")
    l2 = population_lq_norms(spec, vectors, 2.0, mc_budget=mc_budget, seed=seed)
    lq = population_lq_norms(spec, vectors, q, mc_budget=mc_budget, seed=seed)
    ratios = l2 / lq
    return EquivalenceReport(
        q=q,
        max_l2_over_lq=float(ratios.max()),
        max_lq_over_l2=float((1.0 / ratios).max()) if q >= 2 else None,
        ratios=[float(r) for r in ratios],
    )
