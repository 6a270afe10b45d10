"""
Index set geometry: sampling, projections, support functions, nets and covering bounds
"""

import math
from typing import Optional

import numpy as np
import structlog
from scipy import optimize, special
from scipy.spatial.distance import cdist, pdist

from lqlab.core.config import settings
from lqlab.core.exceptions import (
    InvalidArgumentError,
    NetConstructionError,
    UnsupportedOperationError,
)
from lqlab.models.ensemble import EnsembleFamily, EnsembleSpec, NormEstimate
from lqlab.models.index_set import IndexSetSpec, Metric, Net, SetKind
from lqlab.services.ensembles import gaussian_lq_constant, make_generator

logger = structlog.get_logger()

MEMBERSHIP_TOL = 1e-12

# Stream keys
_NET_STREAM = 0x4E4554
_AUDIT_STREAM = 0x415544
_WIDTH_STREAM = 0x574944

_SECTION_INNER_KINDS = (SetKind.L1_BALL, SetKind.ELLIPSOID)


def _finite_points(spec: IndexSetSpec) -> np.ndarray:
    return np.asarray(spec.points, dtype=np.float64).reshape(-1, spec.dimension)


def _semiaxes(spec: IndexSetSpec) -> np.ndarray:
    return np.asarray(spec.semiaxes, dtype=np.float64)


def contains_origin(spec: IndexSetSpec) -> bool:
    """Whether 0 belongs to the set."""
    kind = spec.kind
    if kind in (SetKind.EUCLIDEAN_BALL, SetKind.L1_BALL, SetKind.ELLIPSOID):
        return True
    if kind in (SetKind.EUCLIDEAN_SPHERE, SetKind.SPARSE_SPHERE, SetKind.SECTION):
        return spec.radius == 0.0
    if kind == SetKind.FINITE:
        return bool(np.any(np.all(_finite_points(spec) == 0.0, axis=1)))
    if kind == SetKind.SCALED:
        return contains_origin(spec.inner)
    return False


def contains_point(spec: IndexSetSpec, v: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
    """Membership test up to a relative tolerance."""
    v = np.asarray(v, dtype=np.float64)
    kind = spec.kind
    if kind == SetKind.EMPTY:
        return False
    if kind == SetKind.FINITE:
        gaps = np.linalg.norm(_finite_points(spec) - v, axis=1)
        return bool(gaps.min() <= tol * max(1.0, float(np.linalg.norm(v))))
    if kind == SetKind.SCALED:
        return contains_point(spec.inner, v / spec.factor, tol)
    if kind == SetKind.ELLIPSOID:
        a = _semiaxes(spec)
        flat = a == 0.0
        if np.any(np.abs(v[flat]) > tol):
            return False
        return bool(np.sum((v[~flat] / a[~flat]) ** 2) <= 1.0 + tol)

    r = float(spec.radius)
    slack = tol * max(1.0, r)
    norm = float(np.linalg.norm(v))
    if kind == SetKind.EUCLIDEAN_BALL:
        return norm <= r + slack
    if kind == SetKind.EUCLIDEAN_SPHERE:
        return abs(norm - r) <= slack
    if kind == SetKind.L1_BALL:
        return float(np.abs(v).sum()) <= r + slack
    if kind == SetKind.SPARSE_SPHERE:
        support = int(np.count_nonzero(np.abs(v) > slack))
        return support <= spec.sparsity and abs(norm - r) <= slack
    if kind == SetKind.SECTION:
        return abs(norm - r) <= slack and contains_point(spec.inner, v, tol)
    raise UnsupportedOperationError(f"membership not defined for {kind.value}")


def l2_radius(spec: IndexSetSpec) -> float:
    """max ||v||_2 over the set."""
    kind = spec.kind
    if kind in (
        SetKind.EUCLIDEAN_SPHERE,
        SetKind.EUCLIDEAN_BALL,
        SetKind.L1_BALL,
        SetKind.SPARSE_SPHERE,
        SetKind.SECTION,
    ):
        return float(spec.radius)
    if kind == SetKind.ELLIPSOID:
        return float(_semiaxes(spec).max())
    if kind == SetKind.FINITE:
        return float(np.linalg.norm(_finite_points(spec), axis=1).max())
    if kind == SetKind.SCALED:
        return spec.factor * l2_radius(spec.inner)
    return 0.0


def l2_diameter(spec: IndexSetSpec) -> float:
    """Largest pairwise Euclidean distance."""
    kind = spec.kind
    if kind == SetKind.EMPTY:
        return 0.0
    if kind == SetKind.FINITE:
        pts = _finite_points(spec)
        return float(pdist(pts).max()) if pts.shape[0] > 1 else 0.0
    if kind == SetKind.SCALED:
        return spec.factor * l2_diameter(spec.inner)
    # every remaining kind is centrally symmetric
    return 2.0 * l2_radius(spec)


def _unit_rows(g: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    out = np.zeros_like(g)
    np.divide(g, norms, out=out, where=norms > 0)
    out[norms[:, 0] == 0, 0] = 1.0
    return out


def _sample_l1_boundary(d: int, n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Points with ||v||_1 = radius on random supports of log-uniform size."""
    sizes = np.minimum(
        d, np.floor(np.exp(rng.uniform(0.0, math.log(d + 1.0), size=n))).astype(int)
    )
    sizes = np.maximum(sizes, 1)
    order = np.argsort(rng.random((n, d)), axis=1)
    weights = rng.exponential(size=(n, d))
    mask = np.zeros((n, d), dtype=bool)
    for i, k in enumerate(sizes):
        mask[i, order[i, :k]] = True
    weights = np.where(mask, weights, 0.0)
    signs = rng.choice([-1.0, 1.0], size=(n, d))
    return radius * signs * weights / weights.sum(axis=1, keepdims=True)


def sample_points(spec: IndexSetSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n random points of the set (not necessarily uniform)."""
    d = spec.dimension
    kind = spec.kind
    if kind == SetKind.EMPTY:
        raise NetConstructionError("cannot sample from an empty set")
    if kind == SetKind.FINITE:
        pts = _finite_points(spec)
        return pts[rng.integers(0, pts.shape[0], size=n)]
    if kind == SetKind.SCALED:
        return spec.factor * sample_points(spec.inner, n, rng)
    if kind == SetKind.ELLIPSOID:
        ball = IndexSetSpec.ball(d, 1.0)
        return sample_points(ball, n, rng) * _semiaxes(spec)
    if kind == SetKind.SECTION:
        return _sample_section(spec, n, rng)

    r = float(spec.radius)
    if math.isinf(r):
        raise UnsupportedOperationError("cannot sample an unbounded ball")
    if kind == SetKind.EUCLIDEAN_SPHERE:
        return r * _unit_rows(rng.standard_normal((n, d)))
    if kind == SetKind.EUCLIDEAN_BALL:
        radii = r * rng.random(n) ** (1.0 / d)
        return _unit_rows(rng.standard_normal((n, d))) * radii[:, None]
    if kind == SetKind.L1_BALL:
        e = rng.exponential(size=(n, d + 1))
        signs = rng.choice([-1.0, 1.0], size=(n, d))
        return r * signs * e[:, :d] / e.sum(axis=1, keepdims=True)
    if kind == SetKind.SPARSE_SPHERE:
        s = int(spec.sparsity)
        support = np.argsort(rng.random((n, d)), axis=1)[:, :s]
        values = np.zeros((n, d))
        np.put_along_axis(values, support, rng.standard_normal((n, s)), axis=1)
        return r * _unit_rows(values)
    raise UnsupportedOperationError(f"sampling not defined for {kind.value}")


def _sample_section(spec: IndexSetSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Radially rescale inner points of norm >= rho onto the rho-sphere."""
    rho = float(spec.radius)
    inner = spec.inner
    d = spec.dimension
    if rho == 0.0:
        return np.zeros((n, d))
    collected: list[np.ndarray] = []
    have = 0
    for _ in range(64):
        pool = [sample_points(inner, n, rng)]
        if inner.kind == SetKind.L1_BALL:
            pool.append(_sample_l1_boundary(d, n, float(inner.radius), rng))
        elif inner.kind == SetKind.ELLIPSOID:
            pool.append(_unit_rows(rng.standard_normal((n, d))) * _semiaxes(inner))
        cand = np.vstack(pool)
        norms = np.linalg.norm(cand, axis=1)
        keep = norms >= rho
        if np.any(keep):
            collected.append(cand[keep] * (rho / norms[keep])[:, None])
            have += int(keep.sum())
        if have >= n:
            return np.vstack(collected)[:n]
    raise NetConstructionError(
        f"could not sample {n} points of the radius {rho:g} section of {inner.kind.value}"
    )


def _project_l1(v: np.ndarray, r: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball by sorting."""
    a = np.abs(v)
    if a.sum() <= r:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, u.size + 1)
    rho = np.nonzero(u * idx > (css - r))[0][-1]
    theta = (css[rho] - r) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def _project_ellipsoid(v: np.ndarray, a: np.ndarray) -> np.ndarray:
    flat = a == 0.0
    w = np.where(flat, 0.0, v)
    if np.sum((w[~flat] / a[~flat]) ** 2) <= 1.0:
        return w
    a2 = a * a
    scale = float(np.linalg.norm(a * w))

    def excess(t: float) -> float:
        return float(np.sum(a2 * w * w / (a2 + t) ** 2)) - 1.0

    t = optimize.brentq(excess, 0.0, max(scale, 1e-300))
    x = a2 * w / (a2 + t)
    # brentq stops within tolerance; pull the last ulps inside
    excess_norm = math.sqrt(float(np.sum((x[~flat] / a[~flat]) ** 2)))
    return x / max(1.0, excess_norm)


def project(spec: IndexSetSpec, v: np.ndarray) -> np.ndarray:
    """Nearest point of the set (a retraction for sections and sparse spheres)."""
    v = np.asarray(v, dtype=np.float64)
    kind = spec.kind
    if kind == SetKind.EMPTY:
        raise UnsupportedOperationError("cannot project onto an empty set")
    if kind == SetKind.FINITE:
        pts = _finite_points(spec)
        return pts[int(np.argmin(np.linalg.norm(pts - v, axis=1)))].copy()
    if kind == SetKind.SCALED:
        return spec.factor * project(spec.inner, v / spec.factor)
    if kind == SetKind.ELLIPSOID:
        return _project_ellipsoid(v, _semiaxes(spec))

    r = float(spec.radius)
    norm = float(np.linalg.norm(v))
    if kind == SetKind.EUCLIDEAN_BALL:
        return v.copy() if norm <= r else v * (r / norm)
    if kind == SetKind.EUCLIDEAN_SPHERE:
        return r * _unit_rows(v[None, :])[0]
    if kind == SetKind.L1_BALL:
        return _project_l1(v, r)
    if kind == SetKind.SPARSE_SPHERE:
        keep = np.argsort(-np.abs(v), kind="stable")[: spec.sparsity]
        w = np.zeros_like(v)
        w[keep] = v[keep]
        return r * _unit_rows(w[None, :])[0]
    if kind == SetKind.SECTION:
        w = v.copy()
        for _ in range(50):
            w = project(spec.inner, w)
            n = float(np.linalg.norm(w))
            if n >= r:
                return w * (r / n)
            w = r * _unit_rows(w[None, :])[0]
        return _section_anchor(spec, w)
    raise UnsupportedOperationError(f"projection not defined for {kind.value}")


def _section_anchor(spec: IndexSetSpec, w: np.ndarray) -> np.ndarray:
    """A point of the section on the coordinate axis where the inner set is longest."""
    inner = spec.inner
    if inner.kind == SetKind.ELLIPSOID:
        i = int(np.argmax(_semiaxes(inner)))
    else:
        i = int(np.argmax(np.abs(w)))
    v = np.zeros_like(w)
    v[i] = float(spec.radius) * (1.0 if w[i] >= 0 else -1.0)
    return v


def _l1_section_support(g: np.ndarray, r: float, rho: float) -> float:
    """sup <v, g> over ||v||_1 <= r, ||v||_2 <= rho (inf-convolution dual)."""
    a = np.abs(g)
    top = float(a.max())
    if top == 0.0:
        return 0.0

    def dual(t: float) -> float:
        return r * t + rho * float(np.linalg.norm(np.maximum(a - t, 0.0)))

    res = optimize.minimize_scalar(dual, bounds=(0.0, top), method="bounded")
    return float(min(res.fun, dual(0.0), dual(top)))


def _ellipsoid_section_support(g: np.ndarray, a: np.ndarray, rho: float) -> float:
    """Upper bound on sup <v, g> over the ellipsoid intersected with rho B_2.

    Any nonnegative Lagrange multipliers give an upper bound; they are
    optimized over their logarithms.
    """
    crude = min(float(np.linalg.norm(a * g)), rho * float(np.linalg.norm(g)))
    if crude == 0.0:
        return 0.0
    g2 = g * g
    a2 = np.maximum(a * a, 1e-300)

    def dual(z: np.ndarray) -> float:
        lam, mu = math.exp(z[0]), math.exp(z[1])
        return float(np.sum(g2 / (4.0 * (lam / a2 + mu)))) + lam + mu * rho * rho

    start = np.log([max(crude, 1e-12) / 2.0, max(crude, 1e-12) / (2.0 * rho * rho)])
    res = optimize.minimize(dual, start, method="Nelder-Mead", options={"xatol": 1e-8})
    return float(min(res.fun, crude))


def support_function(spec: IndexSetSpec, g: np.ndarray) -> np.ndarray:
    """h(g) = sup_{v in set} <v, g> for each row of g."""
    g = np.atleast_2d(np.asarray(g, dtype=np.float64))
    kind = spec.kind
    if kind == SetKind.FINITE:
        return (g @ _finite_points(spec).T).max(axis=1)
    if kind == SetKind.SCALED:
        return spec.factor * support_function(spec.inner, g)
    if kind == SetKind.ELLIPSOID:
        return np.linalg.norm(g * _semiaxes(spec), axis=1)
    if kind == SetKind.EMPTY:
        raise UnsupportedOperationError("support function of an empty set")

    r = float(spec.radius)
    if kind in (SetKind.EUCLIDEAN_SPHERE, SetKind.EUCLIDEAN_BALL):
        if math.isinf(r):
            raise UnsupportedOperationError("unbounded ball has no finite support function")
        return r * np.linalg.norm(g, axis=1)
    if kind == SetKind.L1_BALL:
        return r * np.abs(g).max(axis=1)
    if kind == SetKind.SPARSE_SPHERE:
        s = int(spec.sparsity)
        top = -np.partition(-(g * g), s - 1, axis=1)[:, :s]
        return r * np.sqrt(top.sum(axis=1))
    if kind == SetKind.SECTION:
        inner = spec.inner
        if inner.kind == SetKind.L1_BALL:
            return np.array([_l1_section_support(row, float(inner.radius), r) for row in g])
        if inner.kind == SetKind.ELLIPSOID:
            a = _semiaxes(inner)
            return np.array([_ellipsoid_section_support(row, a, r) for row in g])
    raise UnsupportedOperationError(f"support function not defined for {kind.value}")


def support_point(spec: IndexSetSpec, g: np.ndarray) -> np.ndarray:
    """A maximizer of <v, g> over the set (approximate for sections)."""
    g = np.asarray(g, dtype=np.float64)
    kind = spec.kind
    if kind == SetKind.FINITE:
        pts = _finite_points(spec)
        return pts[int(np.argmax(pts @ g))].copy()
    if kind == SetKind.SCALED:
        return spec.factor * support_point(spec.inner, g)
    if kind == SetKind.ELLIPSOID:
        a2 = _semiaxes(spec) ** 2
        denom = float(np.linalg.norm(_semiaxes(spec) * g))
        return a2 * g / denom if denom > 0 else project(spec, np.zeros_like(g))
    if kind in (SetKind.EUCLIDEAN_SPHERE, SetKind.EUCLIDEAN_BALL):
        return float(spec.radius) * _unit_rows(g[None, :])[0]
    if kind == SetKind.L1_BALL:
        i = int(np.argmax(np.abs(g)))
        v = np.zeros_like(g)
        v[i] = float(spec.radius) * (1.0 if g[i] >= 0 else -1.0)
        return v
    if kind == SetKind.SPARSE_SPHERE:
        return project(spec, g)
    if kind == SetKind.SECTION:
        return project(spec, float(spec.radius) * _unit_rows(g[None, :])[0])
    raise UnsupportedOperationError(f"support point not defined for {kind.value}")


def mean_width(spec: IndexSetSpec, mc_budget: int, seed: int = 0) -> NormEstimate:
    """Monte Carlo estimate of E sup_{v in set} <v, G>."""
    if mc_budget < 2:
        raise InvalidArgumentError("mc_budget must be at least 2")
    rng = make_generator(seed, _WIDTH_STREAM)
    g = rng.standard_normal((mc_budget, spec.dimension))
    values = support_function(spec, g)
    return NormEstimate(
        value=float(values.mean()),
        std_error=float(values.std(ddof=1) / math.sqrt(mc_budget)),
    )


def covering_number_log_bound(spec: IndexSetSpec, eps: float) -> float:
    """Analytic upper bound on log N(set, eps, l2)."""
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    kind = spec.kind
    d = spec.dimension
    if kind == SetKind.EMPTY:
        return 0.0
    if kind == SetKind.FINITE:
        if eps >= l2_diameter(spec):
            return 0.0
        return math.log(len(spec.points))
    if kind == SetKind.SCALED:
        return covering_number_log_bound(spec.inner, eps / spec.factor)
    if kind == SetKind.ELLIPSOID:
        a = l2_radius(spec)
        return 0.0 if eps >= a else d * math.log1p(2.0 * a / eps)

    r = float(spec.radius)
    if math.isinf(r):
        raise UnsupportedOperationError("unbounded ball has no finite covering number")
    if kind == SetKind.EUCLIDEAN_BALL:
        return 0.0 if eps >= r else d * math.log1p(2.0 * r / eps)
    if kind == SetKind.EUCLIDEAN_SPHERE:
        return 0.0 if eps >= 2.0 * r else d * math.log1p(2.0 * r / eps)
    if kind == SetKind.SPARSE_SPHERE:
        if eps >= 2.0 * r:
            return 0.0
        s = int(spec.sparsity)
        log_binom = special.gammaln(d + 1) - special.gammaln(s + 1) - special.gammaln(d - s + 1)
        return float(log_binom) + s * math.log1p(2.0 * r / eps)
    if kind == SetKind.L1_BALL:
        if eps >= r:
            return 0.0
        volumetric = d * math.log1p(2.0 * r / eps)
        # empirical method: averages of ceil(r^2/eps^2) signed vertices or 0
        maurey = math.ceil((r / eps) ** 2) * math.log(2 * d + 1)
        return min(volumetric, maurey)
    if kind == SetKind.SECTION:
        sphere = 0.0 if eps >= 2.0 * r else d * math.log1p(2.0 * r / eps)
        return min(sphere, covering_number_log_bound(spec.inner, eps))
    raise UnsupportedOperationError(f"covering bound not defined for {kind.value}")


def _metric_scale(metric: Metric, ensemble: Optional[EnsembleSpec]) -> float:
    if metric == Metric.L2:
        return 1.0
    if ensemble is None:
        raise InvalidArgumentError("psi2_proxy metric needs an ensemble")
    return ensemble.psi2_constant


def _center_point(spec: IndexSetSpec, rng: np.random.Generator) -> np.ndarray:
    if contains_origin(spec):
        return np.zeros(spec.dimension)
    if spec.kind == SetKind.FINITE:
        return _finite_points(spec)[0].copy()
    return sample_points(spec, 1, rng)[0]


def epsilon_net(
    spec: IndexSetSpec,
    eps: float,
    seed: int = 0,
    metric: Metric = Metric.L2,
    ensemble: Optional[EnsembleSpec] = None,
    max_points: Optional[int] = None,
    failure_streak: Optional[int] = None,
    repair_probes: Optional[int] = None,
) -> Net:
    """Randomized greedy packing net of the set at resolution eps.

    Candidates are kept when at least eps/2 from every kept point; packing
    stops after ``failure_streak`` consecutive rejections. A repair sweep then
    adds any probe farther than eps from the net. Finite sets are netted
    exhaustively. The origin is the first point whenever the set contains it.
    """
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    if spec.is_empty:
        raise NetConstructionError("cannot build a net of an empty set")
    max_points = max_points or settings.NET_MAX_POINTS
    failure_streak = failure_streak or settings.NET_FAILURE_STREAK
    repair_probes = settings.AUDIT_POINTS if repair_probes is None else repair_probes

    radius = eps / _metric_scale(metric, ensemble)
    rng = make_generator(seed, _NET_STREAM)
    d = spec.dimension

    if radius >= l2_diameter(spec):
        center = _center_point(spec, rng)
        return Net(points=center[None, :], resolution=eps, metric=metric)

    buf = np.empty((max_points, d))
    count = 0
    if contains_origin(spec):
        buf[0] = 0.0
        count = 1

    def farther_than(x: np.ndarray, threshold: float) -> bool:
        if count == 0:
            return True
        return bool(np.min(np.linalg.norm(buf[:count] - x, axis=1)) > threshold)

    if spec.kind == SetKind.FINITE:
        for x in _finite_points(spec):
            if count >= max_points:
                break
            if farther_than(x, radius):
                buf[count] = x
                count += 1
        complete = count < max_points or bool(
            np.all(cdist(_finite_points(spec), buf[:count]).min(axis=1) <= radius)
        )
        return Net(points=buf[:count].copy(), resolution=eps, metric=metric, complete=complete)

    separation = radius / 2.0
    streak = 0
    while streak < failure_streak and count < max_points:
        for x in sample_points(spec, 256, rng):
            if farther_than(x, separation - 1e-15):
                buf[count] = x
                count += 1
                streak = 0
            else:
                streak += 1
            if streak >= failure_streak or count >= max_points:
                break

    if count < max_points and repair_probes > 0:
        for x in sample_points(spec, repair_probes, rng):
            if farther_than(x, radius):
                buf[count] = x
                count += 1
                if count >= max_points:
                    break

    complete = count < max_points
    if not complete:
        logger.warning(
            "Net truncated by point budget",
            kind=spec.kind.value,
            dimension=d,
            eps=eps,
            max_points=max_points,
        )
    return Net(points=buf[:count].copy(), resolution=eps, metric=metric, complete=complete)


def audit_net(
    spec: IndexSetSpec,
    net: Net,
    n_points: Optional[int] = None,
    seed: int = 0,
    ensemble: Optional[EnsembleSpec] = None,
) -> float:
    """Largest distance from a random audit point to the net (in the net metric)."""
    n_points = n_points or settings.AUDIT_POINTS
    rng = make_generator(seed, _AUDIT_STREAM)
    probes = sample_points(spec, n_points, rng)
    worst = 0.0
    for start in range(0, n_points, 512):
        chunk = cdist(probes[start : start + 512], net.points).min(axis=1)
        worst = max(worst, float(chunk.max()))
    return worst * _metric_scale(net.metric, ensemble)


def intersect_lq_sphere(
    spec: IndexSetSpec, R: float, q: float, ensemble: EnsembleSpec
) -> IndexSetSpec:
    """set intersected with {v : ||<X, v>||_{L^q} = R} for Gaussian X.

    For Gaussian X the L^q sphere is the Euclidean sphere of radius
    R / m_q^{1/q}. Other families have no closed form and are rejected.
    """
    if ensemble.family != EnsembleFamily.GAUSSIAN:
        raise UnsupportedOperationError(
            "L^q sphere intersection is only defined for Gaussian ensembles"
        )
    if R <= 0:
        raise InvalidArgumentError("R must be positive")
    result = _intersect_euclidean_sphere(spec, R / gaussian_lq_constant(q))
    if result.is_empty:
        logger.debug(
            "Empty L^q sphere intersection", kind=spec.kind.value, R=R, q=q
        )
    return result


def _radii_match(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, a, b)


def _intersect_euclidean_sphere(spec: IndexSetSpec, rho: float) -> IndexSetSpec:
    kind = spec.kind
    d = spec.dimension
    if kind == SetKind.EMPTY:
        return spec
    if kind == SetKind.EUCLIDEAN_BALL:
        if rho <= float(spec.radius) * (1.0 + 1e-12):
            return IndexSetSpec.sphere(d, rho)
        return IndexSetSpec.empty(d)
    if kind in (SetKind.EUCLIDEAN_SPHERE, SetKind.SPARSE_SPHERE, SetKind.SECTION):
        return spec if _radii_match(float(spec.radius), rho) else IndexSetSpec.empty(d)
    if kind in _SECTION_INNER_KINDS:
        if rho <= l2_radius(spec) * (1.0 + 1e-12):
            return IndexSetSpec.section(spec, rho)
        return IndexSetSpec.empty(d)
    if kind == SetKind.FINITE:
        pts = _finite_points(spec)
        keep = [p for p in pts if _radii_match(float(np.linalg.norm(p)), rho)]
        return IndexSetSpec.finite([list(p) for p in keep]) if keep else IndexSetSpec.empty(d)
    if kind == SetKind.SCALED:
        inner = _intersect_euclidean_sphere(spec.inner, rho / spec.factor)
        return inner if inner.is_empty else IndexSetSpec.scaled(inner, spec.factor)
    raise UnsupportedOperationError(f"intersection not defined for {kind.value}")
