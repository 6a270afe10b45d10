"""
Generic chaining models
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from lqlab.models.index_set import Metric
from lqlab.models.types import Array


class ChainingMethod(str, Enum):
    """How a gamma_2 upper estimate was obtained."""

    DUDLEY = "dudley"
    SEQUENCE = "sequence"


class AdmissibleSequence(BaseModel):
    """Nested subsets T_0 of T_1 of ... of a finite working set.

    ``order`` is the farthest-point insertion order, so level n is the prefix
    ``order[: sizes[n]]``. ``projections[n][i]`` is the index of the point of
    T_n nearest to working point i (ties to the lowest point index).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    points: Array
    order: Array
    sizes: list[int]
    projections: list[Array]
    metric: Metric = Metric.L2
    metric_scale: float = Field(default=1.0, gt=0.0)

    @property
    def depth(self) -> int:
        """Index of the last level."""
        return len(self.sizes) - 1

    def level(self, n: int) -> Array:
        """Point indices of T_n (levels past the last one repeat it)."""
        n = min(n, self.depth)
        return self.order[: self.sizes[n]]


class ChainingEstimate(BaseModel):
    """Upper estimate of gamma_2(T, d)."""

    value: float = Field(ge=0.0)
    method: ChainingMethod
    metric: Metric = Metric.L2
    eps_grid: Optional[list[float]] = None
    levels: Optional[int] = None


class ChainDiagnostics(BaseModel):
    """Chain of one point split at the critical time."""

    critical_time: int
    initial_sum: float = Field(ge=0.0)
    terminal_sum: float = Field(ge=0.0)
    total: float = Field(ge=0.0)
    summands: list[float]
