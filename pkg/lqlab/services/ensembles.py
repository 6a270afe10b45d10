"""
Ensemble samplers and L^q / Orlicz norm machinery
"""

import math
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import structlog
from scipy import integrate, optimize, special

from lqlab.core.exceptions import InvalidArgumentError
from lqlab.models.ensemble import (
    UNIFORM_HALF_WIDTH,
    EnsembleFamily,
    EnsembleSpec,
    NormEstimate,
    SampleBatch,
)

logger = structlog.get_logger()

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *keys: int) -> int:
    """64-bit seed for the stream at ``(seed, *keys)``."""
    state = np.random.SeedSequence([seed & _MASK64, *keys]).generate_state(
        2, dtype=np.uint32
    )
    return (int(state[0]) << 32) | int(state[1])


def make_generator(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream at ``(seed, *keys)``.

    Streams depend only on the key path, never on the order in which they are
    requested, so trial results do not depend on the worker count.
    """
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([seed & _MASK64, *keys]))
    )


def draw_rows(spec: EnsembleSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent copies of X as an n x d array."""
    shape = (n, spec.dimension)
    if spec.family == EnsembleFamily.GAUSSIAN:
        return rng.standard_normal(shape)
    if spec.family == EnsembleFamily.RADEMACHER:
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    if spec.family == EnsembleFamily.BOUNDED_UNIFORM:
        return rng.uniform(-UNIFORM_HALF_WIDTH, UNIFORM_HALF_WIDTH, size=shape)
    raise InvalidArgumentError(f"Unknown ensemble family: {spec.family}")


def sample_batch(spec: EnsembleSpec, n: int, seed: int, trial: int = 0) -> SampleBatch:
    """Draw the design matrix of trial ``trial`` under root seed ``seed``."""
    if n < 1:
        raise InvalidArgumentError("sample count must be at least 1")
    if spec.dimension < 1:
        raise InvalidArgumentError("dimension must be at least 1")
    rng = make_generator(seed, trial)
    return SampleBatch(rows=draw_rows(spec, n, rng), seed=seed, trial=trial, spec=spec)


def load_design_matrix(path: str | Path, spec: EnsembleSpec | None = None) -> SampleBatch:
    """Read a dense comma-separated matrix, one observation per row."""
    try:
        rows = np.loadtxt(Path(path), delimiter=",", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise InvalidArgumentError(f"cannot read design matrix {path}: {exc}") from exc
    if rows.size == 0:
        raise InvalidArgumentError(f"design matrix {path} is empty")
    if spec is None:
        spec = EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=rows.shape[1])
    elif spec.dimension != rows.shape[1]:
        raise InvalidArgumentError(
            f"design matrix has {rows.shape[1]} columns, ensemble expects {spec.dimension}"
        )
    logger.info("Loaded design matrix", path=str(path), shape=list(rows.shape))
    return SampleBatch(rows=rows, seed=0, trial=0, spec=spec)


def gaussian_abs_moment(q: float) -> float:
    """m_q = E|g|^q = 2^{q/2} Gamma((q+1)/2) / sqrt(pi)."""
    if q < 1:
        raise InvalidArgumentError("q must be at least 1")
    return math.exp(
        0.5 * q * math.log(2.0) + special.gammaln(0.5 * (q + 1.0)) - 0.5 * math.log(math.pi)
    )


def gaussian_lq_constant(q: float) -> float:
    """||<G, v>||_{L^q} / ||v||_2 = m_q^{1/q}."""
    return gaussian_abs_moment(q) ** (1.0 / q)


def _reference_rows(spec: EnsembleSpec, mc_budget: int, seed: int) -> np.ndarray:
    return draw_rows(spec, mc_budget, make_generator(seed, 0x504F50))


def population_lq_norms(
    spec: EnsembleSpec, vectors: np.ndarray, q: float, mc_budget: int = 0, seed: int = 0
) -> np.ndarray:
    """Row-wise population L^q norms; the reference sample is shared across rows."""
    if q < 1:
        raise InvalidArgumentError("q must be at least 1")
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vectors.shape[1] != spec.dimension:
        raise InvalidArgumentError(
            f"vectors of width {vectors.shape[1]} do not match dimension {spec.dimension}"
        )
    if spec.family == EnsembleFamily.GAUSSIAN:
        return np.linalg.norm(vectors, axis=1) * gaussian_lq_constant(q)
    if mc_budget < 1:
        raise InvalidArgumentError("mc_budget must be positive for non-Gaussian ensembles")
    rows = _reference_rows(spec, mc_budget, seed)
    out = np.empty(vectors.shape[0])
    for start in range(0, vectors.shape[0], 256):
        block = np.abs(rows @ vectors[start : start + 256].T) ** q
        out[start : start + 256] = block.mean(axis=0) ** (1.0 / q)
    return out


def population_lq_norm(
    spec: EnsembleSpec,
    v: Sequence[float] | np.ndarray,
    q: float,
    mc_budget: int = 0,
    seed: int = 0,
) -> NormEstimate:
    """(E|<X, v>|^q)^{1/q}; exact for Gaussian X, Monte Carlo otherwise."""
    if q < 1:
        raise InvalidArgumentError("q must be at least 1")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (spec.dimension,):
        raise InvalidArgumentError(
            f"vector of shape {v.shape} does not match dimension {spec.dimension}"
        )
    if spec.family == EnsembleFamily.GAUSSIAN:
        return NormEstimate(
            value=float(np.linalg.norm(v)) * gaussian_lq_constant(q), std_error=0.0
        )
    if mc_budget < 1:
        raise InvalidArgumentError("mc_budget must be positive for non-Gaussian ensembles")

    rows = _reference_rows(spec, mc_budget, seed)
    powers = np.abs(rows @ v) ** q
    mean = float(powers.mean())
    if mean == 0.0:
        return NormEstimate(value=0.0, std_error=0.0)
    se_mean = float(powers.std(ddof=1) / math.sqrt(mc_budget)) if mc_budget > 1 else 0.0
    value = mean ** (1.0 / q)
    # delta method for the 1/q-th power
    return NormEstimate(value=value, std_error=value * se_mean / (q * mean))


def psi2_norm_proxy(spec: EnsembleSpec, v: Sequence[float] | np.ndarray) -> float:
    """kappa * ||v||_2, the d_psi2 distance of <., u> and <., w> at v = u - w."""
    return spec.psi2_constant * float(np.linalg.norm(np.asarray(v, dtype=np.float64)))


def _psi2_moment(family: EnsembleFamily, c: float) -> float:
    """E 2^{(X_1 / c)^2} for one coordinate."""
    s = math.log(2.0) / (c * c)
    if family == EnsembleFamily.RADEMACHER:
        return math.exp(s)
    if family == EnsembleFamily.BOUNDED_UNIFORM:
        a = UNIFORM_HALF_WIDTH
        value, _ = integrate.quad(lambda x: math.exp(s * x * x), 0.0, a)
        return value / a
    if s >= 0.5:
        return math.inf
    value, _ = integrate.quad(
        lambda x: math.exp((s - 0.5) * x * x), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12
    )
    return value / math.sqrt(2.0 * math.pi)


@lru_cache(maxsize=None)
def coordinate_psi2_norm(family: EnsembleFamily) -> float:
    """||X_1||_psi2 under psi_2(x) = 2^{x^2} - 1, by bisection on E psi_2 = 1."""
    # Gaussian moment is finite only for c^2 > 2 ln 2
    lower = 1.2 if family == EnsembleFamily.GAUSSIAN else 0.5
    return float(
        optimize.brentq(
            lambda c: _psi2_moment(family, c) - 2.0, lower, 10.0, xtol=1e-14, rtol=1e-13
        )
    )


def empirical_psi_norm(samples: Sequence[float] | np.ndarray, alpha: float) -> float:
    """Moment-method proxy sup_{1 <= p <= log n} ||x||_{L^p(empirical)} / p^{1/alpha}.

    Equivalent to the psi_alpha norm only up to constants; use it in ratios.
    """
    x = np.abs(np.asarray(samples, dtype=np.float64).ravel())
    if x.size < 2:
        raise InvalidArgumentError("empirical_psi_norm needs at least 2 samples")
    if alpha <= 0:
        raise InvalidArgumentError("alpha must be positive")
    scale = float(x.max())
    if scale == 0.0:
        return 0.0
    p_max = max(1.0, math.log(x.size))
    grid = np.linspace(1.0, p_max, num=max(2, int(8 * p_max)))
    y = x / scale
    norms = np.array([np.mean(y**p) ** (1.0 / p) for p in grid])
    return scale * float(np.max(norms / grid ** (1.0 / alpha)))
