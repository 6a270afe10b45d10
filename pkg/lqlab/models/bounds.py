"""
Inputs and reports of the theoretical bound evaluators
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class BoundKind(str, Enum):
    """Evaluator tag used by calibration."""

    MAIN = "main"  # tail form, any q >= 1
    MOMENT = "moment"  # L^p moment form, q in [1, 2]


class BoundInputs(BaseModel):
    """gamma_2(F), diam(F), N, q, u (or p) and the absolute constant."""

    model_config = ConfigDict(frozen=True)

    gamma2: float = Field(ge=0.0)
    diam: float = Field(ge=0.0)
    N: int = Field(ge=1)
    q: float = Field(ge=1.0)
    u: float = Field(default=1.0, ge=1.0, description="Deviation u or moment p")
    C: float = Field(default=1.0, gt=0.0)


class BoundTerms(BaseModel):
    """Additive parts of a bound, each already multiplied by C."""

    complexity_gamma: float
    complexity_mixed: float
    deviation: float


class BoundReport(BaseModel):
    """Evaluated bound with inputs echoed."""

    kind: BoundKind
    value: float
    inputs: BoundInputs
    terms: BoundTerms
    calibrated_constant: Optional[float] = None


class ScalingFit(BaseModel):
    """Least squares fit of log(statistic) against log(N)."""

    slope: float
    intercept: float
    r_squared: float
    pairs: list[tuple[float, float]]


class CalibrationResult(BaseModel):
    """Smallest constant making an evaluator dominate all observations."""

    constant: float = Field(ge=0.0)
    feasible: bool
    binding_index: Optional[int] = None


class TailShapeFit(BaseModel):
    """Regression of log tail probability against the Bernstein exponent."""

    slope: float
    intercept: float
    r_squared: float
    points_used: int
