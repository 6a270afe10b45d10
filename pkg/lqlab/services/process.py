"""
L^q empirical process evaluation, supremum search and trial campaigns
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Protocol, Sequence

import numpy as np
import structlog

from lqlab.core.config import experiment_defaults, settings
from lqlab.core.exceptions import InvalidArgumentError
from lqlab.models.ensemble import EnsembleFamily, EnsembleSpec, SampleBatch
from lqlab.models.index_set import IndexSetSpec, Net, SetKind
from lqlab.models.process import (
    ProcessConfig,
    SearchAudit,
    SupEstimate,
    TailPoint,
    TrialSummary,
)
from lqlab.services.ensembles import (
    derive_seed,
    draw_rows,
    gaussian_abs_moment,
    make_generator,
    population_lq_norm,
    psi2_norm_proxy,
    sample_batch,
)
from lqlab.services.index_sets import (
    contains_point,
    epsilon_net,
    l2_diameter,
    l2_radius,
    project,
    support_point,
)

logger = structlog.get_logger()

_POPULATION_STREAM = 0x52454601


class SetObjective(Protocol):
    """Nonnegative objective maximized over an index set."""

    def values(self, points: np.ndarray) -> np.ndarray: ...

    def gradient(self, v: np.ndarray) -> np.ndarray: ...


def _abs_power_grad(z: np.ndarray, q: float) -> np.ndarray:
    """d/dz |z|^q, with subgradient 0 at z = 0."""
    if q == 1.0:
        return np.sign(z)
    return q * np.abs(z) ** (q - 1.0) * np.sign(z)


class PopulationModel:
    """v -> E|<X, v>|^q with its gradient.

    Exact for Gaussian X and for q = 2 (every family is isotropic); otherwise a
    fixed reference sample stands in for the law of X, so repeated calls use
    common random numbers.
    """

    def __init__(
        self, spec: EnsembleSpec, q: float, reference: Optional[np.ndarray] = None
    ):
        self.spec = spec
        self.q = q
        self.reference = reference
        self.exact = reference is None
        if self.exact and not self._has_closed_form(spec, q):
            raise InvalidArgumentError(
                f"{spec.family.value} at q={q:g} needs a reference sample"
            )
        self._moment = gaussian_abs_moment(q) if spec.family == EnsembleFamily.GAUSSIAN else 1.0

    @staticmethod
    def _has_closed_form(spec: EnsembleSpec, q: float) -> bool:
        return spec.family == EnsembleFamily.GAUSSIAN or q == 2.0

    @classmethod
    def build(cls, spec: EnsembleSpec, q: float, N: int, seed: int) -> "PopulationModel":
        """Exact model when available, else a reference sample of size 64 N."""
        if cls._has_closed_form(spec, q):
            return cls(spec, q)
        size = settings.POPULATION_BUDGET_FACTOR * N
        rows = draw_rows(spec, size, make_generator(seed, _POPULATION_STREAM))
        return cls(spec, q, reference=rows)

    def values(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.exact:
            return self._moment * np.linalg.norm(points, axis=1) ** self.q
        out = np.empty(points.shape[0])
        for start in range(0, points.shape[0], 256):
            block = self.reference @ points[start : start + 256].T
            out[start : start + 256] = np.mean(np.abs(block) ** self.q, axis=0)
        return out

    def value(self, v: np.ndarray) -> float:
        return float(self.values(v[None, :])[0])

    def std_error(self, v: np.ndarray) -> float:
        """Standard error of the reference-sample mean at v (0 when exact)."""
        if self.exact:
            return 0.0
        powers = np.abs(self.reference @ v) ** self.q
        return float(powers.std(ddof=1) / math.sqrt(powers.size))

    def gradient(self, v: np.ndarray) -> np.ndarray:
        if self.exact:
            norm = float(np.linalg.norm(v))
            if norm == 0.0:
                return np.zeros_like(v)
            return self._moment * self.q * norm ** (self.q - 2.0) * v
        z = self.reference @ v
        return _abs_power_grad(z, self.q) @ self.reference / z.size


class DeviationObjective:
    """v -> |(1/N) sum |<X_i, v>|^q - E|<X, v>|^q| for one design matrix."""

    def __init__(
        self,
        rows: np.ndarray,
        q: float,
        population: PopulationModel,
        net_population: Optional[tuple[np.ndarray, np.ndarray]] = None,
    ):
        self.rows = rows
        self.q = q
        self.population = population
        self._net_population = net_population

    def signed(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        empirical = np.mean(np.abs(self.rows @ points.T) ** self.q, axis=0)
        if self._net_population is not None and points is self._net_population[0]:
            return empirical - self._net_population[1]
        return empirical - self.population.values(points)

    def values(self, points: np.ndarray) -> np.ndarray:
        return np.abs(self.signed(points))

    def value(self, v: np.ndarray) -> float:
        return float(self.values(v[None, :])[0])

    def gradient(self, v: np.ndarray) -> np.ndarray:
        z = self.rows @ v
        empirical = float(np.mean(np.abs(z) ** self.q))
        direction = np.sign(empirical - self.population.value(v))
        grad = _abs_power_grad(z, self.q) @ self.rows / z.size
        return direction * (grad - self.population.gradient(v))


def empirical_lq_deviation(
    batch: SampleBatch, v: Sequence[float] | np.ndarray, q: float, pop_q_norm: float
) -> float:
    """(1/N) sum_i |<X_i, v>|^q - pop_q_norm^q."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (batch.dimension,):
        raise InvalidArgumentError(
            f"vector of shape {v.shape} does not match dimension {batch.dimension}"
        )
    if q < 1:
        raise InvalidArgumentError("q must be at least 1")
    if pop_q_norm < 0:
        raise InvalidArgumentError("pop_q_norm must be nonnegative")
    return float(np.mean(np.abs(batch.rows @ v) ** q)) - pop_q_norm**q


def default_net_eps(index_set: IndexSetSpec) -> float:
    """0.05 * diameter, or 1 for single-point sets."""
    diam = l2_diameter(index_set)
    return experiment_defaults.NET_EPS_FRACTION * diam if diam > 0 else 1.0


def search_net(
    index_set: IndexSetSpec,
    net_eps: Optional[float] = None,
    max_points: Optional[int] = None,
    seed: int = 0,
) -> Net:
    """Candidate points for sup search: all points of finite sets, else an eps-net."""
    if index_set.kind == SetKind.FINITE:
        points = np.asarray(index_set.points, dtype=np.float64)
        return Net(points=points, resolution=net_eps or 1.0)
    return epsilon_net(
        index_set,
        net_eps or default_net_eps(index_set),
        seed=seed,
        max_points=max_points,
    )


def _ascend(
    index_set: IndexSetSpec,
    objective: SetObjective,
    start: np.ndarray,
    steps: int,
    step_scale: float,
) -> tuple[np.ndarray, float]:
    """Projected normalized (sub)gradient ascent with steps 0.5 r / sqrt(t)."""
    check_membership = index_set.kind == SetKind.SECTION
    v = start.copy()
    best_v, best = v.copy(), float(objective.values(v[None, :])[0])
    for t in range(1, steps + 1):
        g = objective.gradient(v)
        norm = float(np.linalg.norm(g))
        if norm == 0.0 or not math.isfinite(norm):
            break
        candidate = project(index_set, v + (step_scale / math.sqrt(t)) * g / norm)
        if check_membership and not contains_point(index_set, candidate, 1e-9):
            break
        v = candidate
        value = float(objective.values(v[None, :])[0])
        if value > best:
            best_v, best = v.copy(), value
    return best_v, best


def _linearized_ascent(
    index_set: IndexSetSpec, objective: SetObjective, start: np.ndarray, steps: int
) -> tuple[np.ndarray, float]:
    """v <- argmax_{w in set} <grad f(v), w>; monotone for convex f."""
    best_v, best = start.copy(), float(objective.values(start[None, :])[0])
    for _ in range(steps):
        g = objective.gradient(best_v)
        if not np.any(g):
            break
        v = support_point(index_set, g)
        value = float(objective.values(v[None, :])[0])
        if value <= best:
            break
        best_v, best = v, value
    return best_v, best


def maximize_over_set(
    index_set: IndexSetSpec,
    objective: SetObjective,
    net: Net,
    restarts: int = settings.ASCENT_RESTARTS,
    steps: int = settings.ASCENT_STEPS,
    convex: bool = False,
) -> SupEstimate:
    """Best of a net evaluation and ascent from the top net points.

    Convex objectives use linearized (support point) ascent, others projected
    gradient ascent. The result is a lower estimate of the supremum.
    """
    net_values = objective.values(net.points)
    ranking = np.argsort(-net_values, kind="stable")
    best_index = int(ranking[0])
    net_value = float(net_values[best_index])
    best_v, best = net.points[best_index].copy(), net_value

    exhaustive = index_set.kind == SetKind.FINITE
    step_scale = 0.5 * l2_radius(index_set)
    used = 0
    if not exhaustive and step_scale > 0 and steps > 0:
        for index in ranking[:restarts]:
            start = net.points[index]
            if convex:
                v, value = _linearized_ascent(index_set, objective, start, steps)
            else:
                v, value = _ascend(index_set, objective, start, steps, step_scale)
            used += 1
            if value > best:
                best_v, best = v, value

    # recompute at the reported point so value and argmax agree exactly
    value = float(objective.values(best_v[None, :])[0])
    return SupEstimate(
        value=value,
        argmax=best_v,
        audit=SearchAudit(
            net_size=net.size,
            net_complete=net.complete,
            restarts=used,
            net_value=net_value,
            improvement=max(0.0, value - net_value),
            exhaustive=exhaustive,
        ),
    )


def _unscaled_config(config: ProcessConfig) -> tuple[ProcessConfig, float]:
    """Config over the innermost set of nested scalings, with the total factor.

    The deviation is homogeneous of degree q, so the sup over c T is c^q times
    the sup over T.
    """
    index_set, factor = config.set, 1.0
    while index_set.kind == SetKind.SCALED:
        factor *= index_set.factor
        index_set = index_set.inner
    if index_set is config.set:
        return config, 1.0
    net_eps = config.net_eps / factor if config.net_eps is not None else None
    return config.model_copy(update={"set": index_set, "net_eps": net_eps}), factor


def _rescale(estimate: SupEstimate, factor: float, q: float) -> SupEstimate:
    weight = factor**q
    audit = estimate.audit.model_copy(
        update={
            "net_value": weight * estimate.audit.net_value,
            "improvement": weight * estimate.audit.improvement,
            "population_error": weight * estimate.audit.population_error,
        }
    )
    return SupEstimate(value=weight * estimate.value, argmax=factor * estimate.argmax, audit=audit)


def search_config(config: ProcessConfig) -> ProcessConfig:
    """Config whose set is searched directly; scalings are applied afterwards."""
    return _unscaled_config(config)[0]


def sup_deviation_estimate(
    batch: SampleBatch,
    config: ProcessConfig,
    net: Optional[Net] = None,
    population: Optional[PopulationModel] = None,
    net_population: Optional[np.ndarray] = None,
) -> SupEstimate:
    """Lower estimate of sup_{v in set} |deviation(v)| for one batch.

    ``net``, ``population`` and ``net_population`` let trial campaigns share
    work that does not depend on the batch. Scaled sets are searched through
    their inner set, so a shared ``net`` must cover ``search_config(config).set``.
    """
    if batch.dimension != config.set.dimension:
        raise InvalidArgumentError("batch and index set dimensions differ")
    inner, factor = _unscaled_config(config)
    if net is None:
        net = search_net(inner.set, inner.net_eps, inner.net_max_points, inner.seed)
    if population is None:
        population = PopulationModel.build(config.ensemble, config.q, config.N, config.seed)
    cache = (net.points, net_population) if net_population is not None else None
    objective = DeviationObjective(batch.rows, config.q, population, cache)
    estimate = maximize_over_set(
        inner.set, objective, net, config.ascent_restarts, config.ascent_steps
    )
    if not population.exact:
        estimate.audit.population_error = population.std_error(estimate.argmax)
    if factor != 1.0:
        estimate = _rescale(estimate, factor, config.q)
    return estimate


def tail_curve(summary: TrialSummary, thresholds: Sequence[float]) -> list[TailPoint]:
    """Fraction of trials strictly above each threshold."""
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        return []
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise InvalidArgumentError("thresholds must be sorted ascending")
    values = np.asarray(summary.values)
    return [
        TailPoint(threshold=t, probability=float(np.mean(values > t))) for t in thresholds
    ]


def run_trials(
    config: ProcessConfig,
    thresholds: Optional[Sequence[float]] = None,
    threads: Optional[int] = None,
) -> TrialSummary:
    """Independent sup estimates over `config.trials` seeded design matrices.

    Trial i draws its batch from the stream (seed, i), so the summary does not
    depend on the thread count.
    """
    if config.set.dimension != config.ensemble.dimension:
        raise InvalidArgumentError("ensemble and index set dimensions differ")
    threads = threads or settings.THREADS
    logger.info(
        "Starting trial campaign",
        kind=config.set.kind.value,
        d=config.set.dimension,
        q=config.q,
        N=config.N,
        trials=config.trials,
        threads=threads,
    )
    inner = search_config(config)
    net = search_net(inner.set, inner.net_eps, inner.net_max_points, inner.seed)
    population = PopulationModel.build(config.ensemble, config.q, config.N, config.seed)
    net_population = population.values(net.points)

    def one_trial(trial: int) -> SupEstimate:
        batch = sample_batch(config.ensemble, config.N, config.seed, trial)
        return sup_deviation_estimate(batch, config, net, population, net_population)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        estimates = list(pool.map(one_trial, range(config.trials)))

    values = np.array([e.value for e in estimates])
    levels = experiment_defaults.QUANTILE_LEVELS
    quantiles = {f"{level:g}": float(x) for level, x in zip(levels, np.quantile(values, levels))}
    summary = TrialSummary(
        values=values,
        quantiles=quantiles,
        seeds=[derive_seed(config.seed, trial) for trial in range(config.trials)],
        config=config,
        audits=[e.audit for e in estimates],
    )
    if thresholds is not None:
        summary.tail = tail_curve(summary, thresholds)
    logger.info(
        "Finished trial campaign",
        median=quantiles[f"{levels[0]:g}"],
        net_size=net.size,
        net_complete=net.complete,
    )
    return summary


def single_function_trials(
    spec: EnsembleSpec,
    v: Sequence[float] | np.ndarray,
    q: float,
    N: int,
    trials: int,
    seed: int,
) -> np.ndarray:
    """Signed deviations for F = {<., v>} normalized by ||<X, v>||_psi2^q."""
    v = np.asarray(v, dtype=np.float64)
    if trials < 1:
        raise InvalidArgumentError("trials must be at least 1")
    scale = psi2_norm_proxy(spec, v)
    if scale == 0.0:
        return np.zeros(trials)
    pop = population_lq_norm(
        spec, v, q, mc_budget=settings.POPULATION_BUDGET_FACTOR * N, seed=seed
    ).value
    deviations = np.empty(trials)
    for trial in range(trials):
        z = draw_rows(spec, N, make_generator(seed, trial)) @ v
        deviations[trial] = float(np.mean(np.abs(z) ** q)) - pop**q
    logger.info("Single-function trials done", family=spec.family.value, q=q, N=N, trials=trials)
    return deviations / scale**q
