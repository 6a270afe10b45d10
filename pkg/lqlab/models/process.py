"""
Empirical process configuration and trial summaries
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from lqlab.core.config import settings
from lqlab.models.ensemble import EnsembleSpec
from lqlab.models.index_set import IndexSetSpec
from lqlab.models.types import Array


class ProcessConfig(BaseModel):
    """One sup-deviation experiment: set, ensemble, q, N and search budget."""

    model_config = ConfigDict(frozen=True)

    set: IndexSetSpec
    ensemble: EnsembleSpec
    q: float = Field(ge=1.0)
    N: int = Field(ge=1)
    trials: int = Field(default=1, ge=1)
    net_eps: Optional[float] = Field(
        default=None, gt=0.0, description="Defaults to 0.05 * diameter"
    )
    ascent_restarts: int = Field(default=settings.ASCENT_RESTARTS, ge=0)
    ascent_steps: int = Field(default=settings.ASCENT_STEPS, ge=0)
    net_max_points: int = Field(default=settings.NET_MAX_POINTS, ge=1)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0)


class SearchAudit(BaseModel):
    """How a sup estimate was found."""

    net_size: int
    net_complete: bool
    restarts: int
    net_value: float
    improvement: float = Field(ge=0.0, description="Gain of ascent over the net")
    exhaustive: bool = False
    population_error: float = Field(
        default=0.0, ge=0.0, description="Monte Carlo error of the population term"
    )


class SupEstimate(BaseModel):
    """Lower estimate of a supremum over an index set."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    value: float = Field(ge=0.0)
    argmax: Array
    audit: SearchAudit


class TailPoint(BaseModel):
    threshold: float
    probability: float = Field(ge=0.0, le=1.0)


class TrialSummary(BaseModel):
    """Monte Carlo distribution of sup deviations across trials."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: Array
    quantiles: dict[str, float]
    tail: list[TailPoint] = Field(default_factory=list)
    seeds: list[int]
    config: ProcessConfig
    audits: list[SearchAudit] = Field(default_factory=list)

    def quantile(self, level: float) -> float:
        return self.quantiles[f"{level:g}"]
