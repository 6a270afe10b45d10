"""
Random vector ensembles and sample batches
"""

import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, computed_field

from lqlab.models.types import Array

# psi_2(x) = 2^{x^2} - 1. For a standard Gaussian, E 2^{g^2/c^2} = 2 has the
# closed form c^2 = 8 ln 2 / 3.
GAUSSIAN_PSI2_CONSTANT = math.sqrt(8.0 * math.log(2.0) / 3.0)

# Half-width of the isotropic uniform coordinate law
UNIFORM_HALF_WIDTH = math.sqrt(3.0)


class EnsembleFamily(str, Enum):
    """Distribution family of the random vector X."""

    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    BOUNDED_UNIFORM = "bounded_uniform"


class EnsembleSpec(BaseModel):
    """Isotropic sub-Gaussian ensemble with i.i.d. coordinates."""

    model_config = ConfigDict(frozen=True)

    family: EnsembleFamily
    dimension: int = Field(ge=1, description="Ambient dimension d")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def psi2_constant(self) -> float:
        """kappa with ||<X,v>||_psi2 <= kappa ||v||_2 for every v.

        All three families have moment generating functions dominated by the
        standard Gaussian one, so the Gaussian constant is valid for each of
        them, and it is attained by the Gaussian family.
        """
        return GAUSSIAN_PSI2_CONSTANT


class SampleBatch(BaseModel):
    """N x d design matrix with the seed path that produced it."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rows: Array
    seed: int
    trial: int = 0
    spec: EnsembleSpec

    @property
    def n(self) -> int:
        return int(self.rows.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.rows.shape[1])


class NormEstimate(BaseModel):
    """Point estimate with its Monte Carlo standard error."""

    value: float
    std_error: float = 0.0
