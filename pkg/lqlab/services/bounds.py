"""
Closed-form bound evaluators, calibration and scaling regressions
"""

import math
from typing import Sequence

import numpy as np
import structlog

from lqlab.core.exceptions import InvalidArgumentError, UnsupportedOperationError
from lqlab.models.bounds import (
    BoundInputs,
    BoundKind,
    BoundReport,
    BoundTerms,
    CalibrationResult,
    ScalingFit,
    TailShapeFit,
)

logger = structlog.get_logger()


def _complexity_terms(inp: BoundInputs, exponent: float) -> tuple[float, float]:
    gamma_term = inp.C * inp.gamma2**inp.q / inp.N**exponent
    mixed_term = inp.C * inp.diam ** (inp.q - 1.0) * inp.gamma2 / math.sqrt(inp.N)
    return gamma_term, mixed_term


def _report(kind: BoundKind, inp: BoundInputs, terms: BoundTerms) -> BoundReport:
    value = terms.complexity_gamma + terms.complexity_mixed + terms.deviation
    return BoundReport(kind=kind, value=value, inputs=inp, terms=terms)


def theorem_main_rhs(inp: BoundInputs) -> BoundReport:
    """Tail bound on the sup deviation at confidence 1 - exp(-u), any q >= 1."""
    exponent = min(1.0, inp.q / 2.0)
    gamma_term, mixed_term = _complexity_terms(inp, exponent)
    deviation = (
        inp.C
        * inp.diam**inp.q
        * (math.sqrt(inp.u / inp.N) + inp.u ** (inp.q / 2.0) / inp.N**exponent)
    )
    return _report(
        BoundKind.MAIN,
        inp,
        BoundTerms(complexity_gamma=gamma_term, complexity_mixed=mixed_term, deviation=deviation),
    )


def moment_bound_rhs(inp: BoundInputs) -> BoundReport:
    """L^p moment bound of the sup deviation with p = ``inp.u``, for 1 <= q <= 2."""
    if inp.q > 2.0:
        raise UnsupportedOperationError(
            "moment form covers 1 <= q <= 2; use theorem_main_rhs for q > 2"
        )
    p = inp.u
    gamma_term, mixed_term = _complexity_terms(inp, inp.q / 2.0)
    deviation = inp.C * inp.diam**inp.q * (math.sqrt(p / inp.N) + (p / inp.N) ** (inp.q / 2.0))
    return _report(
        BoundKind.MOMENT,
        inp,
        BoundTerms(complexity_gamma=gamma_term, complexity_mixed=mixed_term, deviation=deviation),
    )


def evaluate_bound(kind: BoundKind, inp: BoundInputs) -> BoundReport:
    if kind == BoundKind.MAIN:
        return theorem_main_rhs(inp)
    if kind == BoundKind.MOMENT:
        return moment_bound_rhs(inp)
    raise UnsupportedOperationError(f"unknown bound kind: {kind}")


def section_moment_rhs(gamma2: float, diam: float, N: int, q: float, C: float = 1.0) -> float:
    """Bound on sup_{v in K} ||X v||_q^q from the tail form at u = N^{min(1, 2/q)}."""
    if N < 1 or q < 1:
        raise InvalidArgumentError("need N >= 1 and q >= 1")
    return (1.0 + C) * N * diam**q + C * (
        N ** max(1.0 - q / 2.0, 0.0) * gamma2**q + math.sqrt(N) * diam ** (q - 1.0) * gamma2
    )


def bernstein_subweibull_threshold(
    psi_norms: Sequence[float] | np.ndarray,
    alpha: float,
    t: float,
    C1: float = 1.0,
    C2: float = 1.0,
) -> float:
    """C1 ||b||_2 sqrt(t) + C2 t^{1/alpha} ||b||_beta with beta the conjugate of alpha."""
    b = np.asarray(psi_norms, dtype=np.float64).ravel()
    if alpha <= 0:
        raise InvalidArgumentError("alpha must be positive")
    if t < 0:
        raise InvalidArgumentError("t must be nonnegative")
    if np.any(b < 0):
        raise InvalidArgumentError("psi norms must be nonnegative")
    if b.size == 0:
        return 0.0
    beta = math.inf if alpha <= 1.0 else alpha / (alpha - 1.0)
    return float(
        C1 * np.linalg.norm(b) * math.sqrt(t)
        + C2 * t ** (1.0 / alpha) * np.linalg.norm(b, ord=beta)
    )


def tail_exponent(x: float, q: float) -> float:
    """min(x^2, x^{2/q})."""
    return min(x * x, x ** (2.0 / q))


def single_function_tail_prob(x: float, N: int, q: float, C4: float = 1.0) -> float:
    """min(1, 2 exp(-N min(x^2, x^{2/q}) / C4))."""
    if x < 0:
        raise InvalidArgumentError("x must be nonnegative")
    return min(1.0, 2.0 * math.exp(-N * tail_exponent(x, q) / C4))


def single_function_moment(psi2_q: float, N: int, q: float, r: float, C5: float = 1.0) -> float:
    """C5 psi2_q (sqrt(r/N) + (r/N)^{q/2})."""
    if psi2_q < 0 or r < 0:
        raise InvalidArgumentError("psi2_q and r must be nonnegative")
    return C5 * psi2_q * (math.sqrt(r / N) + (r / N) ** (q / 2.0))


def moments_to_tail(a0: float, a1: float, a2: float, q: float, x: float) -> float:
    """Level exceeded with probability at most exp(-x), from moment growth a0 + a1 sqrt(p) + a2 p^{1/q}."""
    if x < 1:
        raise InvalidArgumentError("x must be at least 1")
    if min(a0, a1, a2) < 0:
        raise InvalidArgumentError("moment coefficients must be nonnegative")
    constant = max(math.sqrt(2.0), 2.0 ** (1.0 / q))
    return math.e * constant * (a0 + a1 * math.sqrt(x) + a2 * x ** (1.0 / q))


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((y - (slope * x + intercept)) ** 2))
    total = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - residual / total if total > 0 else 1.0
    return float(slope), float(intercept), r_squared


def fit_scaling_exponent(pairs: Sequence[tuple[float, float]]) -> ScalingFit:
    """Least squares slope of log(statistic) against log(N)."""
    pairs = [(float(n), float(s)) for n, s in pairs]
    if len(pairs) < 3:
        raise InvalidArgumentError("scaling fit needs at least 3 pairs")
    if any(n <= 0 or s <= 0 for n, s in pairs):
        raise InvalidArgumentError("scaling fit needs positive N and statistics")
    arr = np.array(pairs)
    slope, intercept, r_squared = _linear_fit(np.log(arr[:, 0]), np.log(arr[:, 1]))
    return ScalingFit(slope=slope, intercept=intercept, r_squared=r_squared, pairs=pairs)


def calibrate_constant(
    observed: Sequence[tuple[BoundInputs, float]], kind: BoundKind = BoundKind.MAIN
) -> CalibrationResult:
    """Smallest C with evaluator(C) >= every observation.

    Every evaluator is linear in C, so C = max_i obs_i / rhs_i(C=1).
    """
    if not observed:
        raise InvalidArgumentError("calibration needs at least one observation")
    constant = 0.0
    binding = None
    for index, (inp, value) in enumerate(observed):
        if value <= 0:
            continue
        unit = evaluate_bound(kind, inp.model_copy(update={"C": 1.0})).value
        if unit <= 0:
            logger.warning("Calibration infeasible", index=index, observed=value)
            return CalibrationResult(constant=math.inf, feasible=False, binding_index=index)
        ratio = value / unit
        if ratio > constant:
            constant, binding = ratio, index
    logger.info("Calibrated constant", kind=kind.value, constant=constant, binding=binding)
    return CalibrationResult(constant=constant, feasible=True, binding_index=binding)


def calibrate_tail_constant(
    thresholds: Sequence[float], tail: Sequence[float], N: int, q: float
) -> CalibrationResult:
    """Smallest C4 with 2 exp(-N min(x^2, x^{2/q}) / C4) >= tail(x) on the grid."""
    if len(thresholds) != len(tail) or not thresholds:
        raise InvalidArgumentError("thresholds and tail must be nonempty and aligned")
    constant = 0.0
    binding = None
    for index, (x, p) in enumerate(zip(thresholds, tail)):
        if p <= 0:
            continue
        needed = N * tail_exponent(float(x), q) / math.log(2.0 / float(p))
        if needed > constant:
            constant, binding = needed, index
    return CalibrationResult(constant=constant, feasible=True, binding_index=binding)


def fit_tail_shape(
    thresholds: Sequence[float], tail: Sequence[float], q: float
) -> TailShapeFit:
    """Regress log tail(x) on min(x^2, x^{2/q}) over points with positive tail."""
    if len(thresholds) != len(tail):
        raise InvalidArgumentError("thresholds and tail must be aligned")
    used = [(tail_exponent(float(x), q), math.log(p)) for x, p in zip(thresholds, tail) if p > 0]
    if len(used) < 2:
        raise InvalidArgumentError("tail shape fit needs at least 2 positive tail points")
    arr = np.array(used)
    slope, intercept, r_squared = _linear_fit(arr[:, 0], arr[:, 1])
    return TailShapeFit(
        slope=slope, intercept=intercept, r_squared=r_squared, points_used=len(used)
    )
