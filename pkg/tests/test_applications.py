import math

import numpy as np
import pytest

from lqlab.core.exceptions import (
    InvalidArgumentError,
    InvalidQueryError,
    UnsupportedOperationError,
)
from lqlab.models.applications import RipQuery, RipVerdict
from lqlab.models.ensemble import EnsembleFamily, EnsembleSpec, SampleBatch
from lqlab.models.index_set import IndexSetSpec, Net
from lqlab.services.applications import (
    dm_lower_dimension_threshold,
    dm_upper_bound,
    fixed_point_radius,
    lq_l2_equivalence_check,
    rip_certify,
    rip_failure_exponent,
    section_diameter,
    section_lower_estimate,
    verify_certificate,
)
from lqlab.services.ensembles import sample_batch


def _query(ensemble, index_set, **overrides):
    params = dict(
        ensemble=ensemble,
        set=index_set,
        q=2.0,
        N=400,
        radius=1.0,
        audit_vectors=200,
        mc_budget=2000,
        seed=3,
    )
    params.update(overrides)
    return RipQuery(**params)


def test_rip_certifies_well_conditioned_design(gaussian4, sphere4):
    certificate = rip_certify(_query(gaussian4, sphere4))
    assert certificate.verdict == RipVerdict.CERTIFIED
    assert 0.5 <= certificate.worst_lower <= 1.0 <= certificate.worst_upper <= 2.0
    assert certificate.audited > 0
    assert certificate.violating_vector is None


def test_rip_audits_every_cone_scale(gaussian4, sphere4):
    certificate = rip_certify(_query(gaussian4, sphere4))
    assert certificate.audited % 3 == 0
    assert certificate.audited <= 3 * 200


def test_rip_reports_violation_on_degenerate_design(gaussian4, sphere4):
    rows = np.zeros((10, 4))
    rows[:, 0] = 1.0
    batch = SampleBatch(rows=rows, seed=0, spec=gaussian4)
    certificate = rip_certify(_query(gaussian4, sphere4, N=10), batch=batch)
    assert certificate.verdict == RipVerdict.VIOLATED
    assert certificate.worst_lower < 0.5
    ratio = verify_certificate(certificate, batch)
    assert ratio == pytest.approx(certificate.violating_ratio)
    assert ratio < 0.5 or ratio > 2.0


def test_verify_certificate_needs_violation(gaussian4, sphere4):
    certificate = rip_certify(_query(gaussian4, sphere4))
    with pytest.raises(InvalidArgumentError):
        verify_certificate(certificate, sample_batch(gaussian4, 400, 3))


def test_rip_empty_cone_is_invalid_query(gaussian4):
    # the unit ball meets no L^2 sphere of radius 5
    with pytest.raises(InvalidQueryError):
        rip_certify(_query(gaussian4, IndexSetSpec.ball(4), radius=5.0))


def test_rip_origin_is_vacuous(gaussian4):
    origin = IndexSetSpec.finite([[0.0] * 4])
    certificate = rip_certify(_query(gaussian4, origin))
    assert certificate.vacuous
    assert certificate.verdict == RipVerdict.CERTIFIED
    assert certificate.audited == 0


def test_rip_non_gaussian_uses_net_of_set(rademacher4, l1_ball4):
    certificate = rip_certify(_query(rademacher4, l1_ball4, N=800))
    assert certificate.verdict == RipVerdict.CERTIFIED


def test_rip_with_solved_radius(gaussian4, l1_ball4):
    certificate = rip_certify(_query(gaussian4, l1_ball4, radius="solve", theta=1.0))
    assert certificate.radius > 0.0
    assert certificate.query.radius == "solve"


def test_rip_rejects_bad_window(gaussian4, sphere4):
    with pytest.raises(InvalidArgumentError):
        rip_certify(_query(gaussian4, sphere4), window=1.5)


def test_rip_failure_exponent():
    assert rip_failure_exponent(100, 2.0) == pytest.approx(100.0)
    assert rip_failure_exponent(100, 4.0) == pytest.approx(10.0)
    with pytest.raises(InvalidArgumentError):
        rip_failure_exponent(0, 2.0)


def test_fixed_point_radius_is_feasible_and_minimal():
    # width per unit radius falls from about E||G||_2 = 3.9 to E max|g_i| = 2.0
    K = IndexSetSpec.l1_ball(16)
    result = fixed_point_radius(K, 2.0, 100, theta=0.3, mc_budget=500, seed=1)
    assert result.feasible
    assert 0.0 < result.radius < result.upper_bracket
    rate = 0.3 * 100**0.5
    assert result.width_at_radius <= rate * result.radius


def test_fixed_point_radius_zero_for_large_samples():
    """Enough samples make every radius feasible."""
    result = fixed_point_radius(IndexSetSpec.sphere(4), 2.0, 10**6, mc_budget=500, seed=1)
    assert result.radius == 0.0
    assert result.feasible


def test_fixed_point_radius_needs_gaussian(rademacher4, sphere4):
    with pytest.raises(UnsupportedOperationError):
        fixed_point_radius(sphere4, 2.0, 10, ensemble=rademacher4)


def test_section_diameter_of_ball_is_operator_norm(gaussian4):
    """With K the unit ball and p = 2 the diameter is the largest singular value."""
    batch = sample_batch(gaussian4, 30, seed=6)
    estimate = section_diameter(batch, IndexSetSpec.ball(4), 2.0, seed=6)
    top = float(np.linalg.svd(batch.rows, compute_uv=False)[0])
    assert estimate.value <= top + 1e-9
    assert estimate.value == pytest.approx(top, rel=1e-4)
    assert estimate.dual_value == pytest.approx(top, rel=1e-4)


def test_section_diameter_of_l1_ball_with_p_inf(gaussian4):
    """K = B_1 and p = inf gives q = 1 and the largest column l1 norm."""
    batch = sample_batch(gaussian4, 20, seed=2)
    vertices = Net(points=np.vstack([np.eye(4), -np.eye(4)]), resolution=1.0)
    estimate = section_diameter(batch, IndexSetSpec.l1_ball(4), math.inf, net=vertices, seed=2)
    assert estimate.value == pytest.approx(float(np.abs(batch.rows).sum(axis=0).max()))


def test_section_lower_estimate_below_diameter(gaussian4):
    batch = sample_batch(gaussian4, 30, seed=1)
    K = IndexSetSpec.ball(4)
    lower = section_lower_estimate(batch, K, 2.0, seed=1)
    assert 0.0 < lower <= section_diameter(batch, K, 2.0, seed=1).value + 1e-9


def test_section_dual_value_is_a_lower_estimate(gaussian4):
    batch = sample_batch(gaussian4, 300, seed=12)
    estimate = section_diameter(batch, IndexSetSpec.ball(4), 2.0, dual_samples=32, seed=12)
    top = float(np.linalg.svd(batch.rows, compute_uv=False)[0])
    assert 0.0 < estimate.dual_value <= top + 1e-9
    assert estimate.value <= top + 1e-9


@pytest.mark.parametrize("p", [2.0, 4.0])
def test_section_lower_estimate_grows_like_root_dimension(p):
    """With N much smaller than d every lambda on the l_p sphere has ||X^T lambda||_2 of order sqrt(d)."""
    d = 256
    batch = sample_batch(EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=d), 8, seed=4)
    lower = section_lower_estimate(batch, IndexSetSpec.ball(d), p, samples=512, seed=4)
    assert lower >= 0.5 * math.sqrt(d)
    smallest = float(np.linalg.svd(batch.rows, compute_uv=False)[-1])
    assert lower >= smallest - 1e-9


def test_section_diameter_rejects_bad_p(gaussian4):
    batch = sample_batch(gaussian4, 5, seed=1)
    with pytest.raises(InvalidArgumentError):
        section_diameter(batch, IndexSetSpec.ball(4), 1.0)


def test_dm_upper_bound_regimes():
    low = dm_upper_bound(3.0, 2.0, 5, 2.0, C=2.0)
    assert low.regime == "p_le_2"
    assert low.value == pytest.approx(6.0)
    assert low.dimension_threshold == pytest.approx(2.25)
    assert not low.within_threshold
    high = dm_upper_bound(4.0, 1.0, 5, 4.0)
    assert high.regime == "p_gt_2"
    assert high.value == pytest.approx(4.0**1.5)
    assert high.dimension_threshold == pytest.approx(4.0 ** (4.0 / 3.0))
    assert high.within_threshold
    assert dm_upper_bound(4.0, 1.0, 5, math.inf).value == pytest.approx(16.0)


def test_dm_lower_dimension_threshold():
    assert dm_lower_dimension_threshold(4.0, 1.0, 4.0) == pytest.approx(4.0**1.5)
    with pytest.raises(InvalidArgumentError):
        dm_lower_dimension_threshold(4.0, 1.0, 2.0)


def test_lq_l2_equivalence(gaussian4):
    vectors = np.eye(4)
    report = lq_l2_equivalence_check(gaussian4, 4.0, vectors)
    # ||g||_4 = 3^{1/4} for a standard Gaussian
    assert report.max_l2_over_lq == pytest.approx(3.0**-0.25)
    assert report.max_lq_over_l2 == pytest.approx(3.0**0.25)
    low_q = lq_l2_equivalence_check(gaussian4, 1.0, vectors)
    assert low_q.max_lq_over_l2 is None
    uniform = EnsembleSpec(family=EnsembleFamily.BOUNDED_UNIFORM, dimension=4)
    bounded = lq_l2_equivalence_check(uniform, 4.0, vectors, mc_budget=20000, seed=2)
    # E U^4 = 9/5 for the unit-variance uniform law
    assert bounded.max_lq_over_l2 == pytest.approx(1.8**0.25, rel=0.05)
