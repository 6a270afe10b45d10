"""
Restricted isometry and random section models
"""

import math
from enum import Enum
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from lqlab.core.config import settings
from lqlab.models.ensemble import EnsembleSpec
from lqlab.models.index_set import IndexSetSpec
from lqlab.models.types import Array


class RipVerdict(str, Enum):
    CERTIFIED = "certified"
    VIOLATED = "violated"


class RipQuery(BaseModel):
    """Restricted isometry check on cone(F(R)) for one design matrix."""

    model_config = ConfigDict(frozen=True)

    ensemble: EnsembleSpec
    set: IndexSetSpec
    q: float = Field(ge=1.0)
    N: int = Field(ge=1)
    radius: Union[float, Literal["solve"]] = Field(
        default=1.0, description="R, or 'solve' for the fixed-point radius"
    )
    theta: float = Field(default=1.0, gt=0.0)
    audit_vectors: int = Field(default=settings.AUDIT_POINTS, ge=1)
    mc_budget: int = Field(default=2000, ge=2)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0)


class RipCertificate(BaseModel):
    """Verdict with the worst observed ratios and the inputs echoed."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    verdict: RipVerdict
    window: float
    worst_lower: float
    worst_upper: float
    audited: int
    vacuous: bool = False
    radius: float
    violating_vector: Optional[Array] = None
    violating_ratio: Optional[float] = None
    design_seed: int
    query: RipQuery


class SectionQuery(BaseModel):
    """l_p diameter of random sections: sup over ||lambda||_p = 1 of ||X^T lambda||_K°."""

    model_config = ConfigDict(frozen=True)

    ensemble: EnsembleSpec
    set: IndexSetSpec
    p: float = Field(gt=1.0)
    N: int = Field(ge=1)
    trials: int = Field(default=1, ge=1)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0)

    @property
    def q(self) -> float:
        """Conjugate exponent p / (p - 1)."""
        return conjugate_exponent(self.p)


def conjugate_exponent(p: float) -> float:
    return 1.0 if math.isinf(p) else p / (p - 1.0)


class SectionEstimate(BaseModel):
    """v-side lower estimate of sup_{v in K} ||X v||_q with the dual audit."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    value: float = Field(ge=0.0)
    argmax: Array
    dual_value: Optional[float] = None
    net_size: int = 0
    improvement: float = 0.0


class FixedPointResult(BaseModel):
    """Smallest R satisfying the width condition, found by bisection."""

    radius: float = Field(ge=0.0)
    feasible: bool
    upper_bracket: float
    iterations: int
    width_at_radius: Optional[float] = None


class DmBound(BaseModel):
    """Upper bound on the l_p diameter and the critical dimension."""

    value: float
    dimension_threshold: float
    regime: Literal["p_le_2", "p_gt_2"]
    within_threshold: bool


class EquivalenceReport(BaseModel):
    """Empirical L^2 / L^q equivalence constants over a list of vectors."""

    q: float
    max_l2_over_lq: float
    max_lq_over_l2: Optional[float] = None
    ratios: list[float]
