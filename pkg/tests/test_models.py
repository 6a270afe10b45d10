import math

import numpy as np
import pytest
from pydantic import ValidationError

from lqlab.models.applications import RipQuery, SectionQuery, conjugate_exponent
from lqlab.models.bounds import BoundInputs
from lqlab.models.chaining import AdmissibleSequence
from lqlab.models.ensemble import GAUSSIAN_PSI2_CONSTANT, EnsembleFamily, EnsembleSpec
from lqlab.models.index_set import IndexSetSpec, SetKind


def test_psi2_constant_closed_form():
    """The Gaussian psi2 constant solves E 2^{g^2/c^2} = 2."""
    assert GAUSSIAN_PSI2_CONSTANT == pytest.approx(math.sqrt(8 * math.log(2) / 3))
    spec = EnsembleSpec(family=EnsembleFamily.RADEMACHER, dimension=3)
    assert spec.psi2_constant == GAUSSIAN_PSI2_CONSTANT


def test_ensemble_rejects_zero_dimension():
    with pytest.raises(ValidationError):
        EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=0)


def test_index_set_constructors():
    """Each constructor produces the matching kind and dimension."""
    assert IndexSetSpec.sphere(3).kind == SetKind.EUCLIDEAN_SPHERE
    assert IndexSetSpec.ball(3, 2.0).radius == 2.0
    assert IndexSetSpec.ellipsoid([1.0, 0.5]).dimension == 2
    finite = IndexSetSpec.finite([[1.0, 0.0], [0.0, 1.0]])
    assert finite.kind == SetKind.FINITE
    assert len(finite.points) == 2
    section = IndexSetSpec.section(IndexSetSpec.l1_ball(3), 0.5)
    assert section.inner.kind == SetKind.L1_BALL
    assert IndexSetSpec.empty(3).is_empty


def test_index_set_validation():
    with pytest.raises(ValidationError):
        IndexSetSpec(kind=SetKind.EUCLIDEAN_SPHERE, dimension=3)
    with pytest.raises(ValidationError):
        IndexSetSpec.sparse_sphere(3, 4)
    with pytest.raises(ValidationError):
        IndexSetSpec.ellipsoid([1.0, -1.0])
    with pytest.raises(ValidationError):
        IndexSetSpec.sphere(3, math.inf)
    # only the ball may be unbounded
    assert math.isinf(IndexSetSpec.ball(3, math.inf).radius)


def test_index_set_is_hashable_and_frozen():
    spec = IndexSetSpec.sphere(3)
    assert spec == IndexSetSpec.sphere(3)
    with pytest.raises(ValidationError):
        spec.radius = 2.0


def test_bound_inputs_validation():
    with pytest.raises(ValidationError):
        BoundInputs(gamma2=-1.0, diam=1.0, N=10, q=2.0)
    with pytest.raises(ValidationError):
        BoundInputs(gamma2=1.0, diam=1.0, N=10, q=0.5)
    with pytest.raises(ValidationError):
        BoundInputs(gamma2=1.0, diam=1.0, N=10, q=2.0, u=0.5)


def test_rip_query_radius_solve(gaussian4, sphere4):
    query = RipQuery(ensemble=gaussian4, set=sphere4, q=2.0, N=50, radius="solve")
    assert query.radius == "solve"
    with pytest.raises(ValidationError):
        RipQuery(ensemble=gaussian4, set=sphere4, q=2.0, N=50, radius="large")


def test_conjugate_exponent():
    assert conjugate_exponent(2.0) == 2.0
    assert conjugate_exponent(3.0) == pytest.approx(1.5)
    assert conjugate_exponent(math.inf) == 1.0


def test_section_query_exponent(gaussian4, sphere4):
    query = SectionQuery(ensemble=gaussian4, set=sphere4, p=4.0, N=10)
    assert query.q == pytest.approx(4.0 / 3.0)
    assert SectionQuery(ensemble=gaussian4, set=sphere4, p=math.inf, N=10).q == 1.0
    with pytest.raises(ValidationError):
        SectionQuery(ensemble=gaussian4, set=sphere4, p=1.0, N=10)


def test_admissible_sequence_levels_repeat_last():
    seq = AdmissibleSequence(
        points=np.eye(3),
        order=np.array([0, 1, 2]),
        sizes=[1, 3],
        projections=[np.zeros(3, dtype=int), np.arange(3)],
    )
    assert seq.depth == 1
    assert list(seq.level(0)) == [0]
    assert list(seq.level(4)) == [0, 1, 2]
