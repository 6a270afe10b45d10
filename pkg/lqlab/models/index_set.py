"""
Index sets T in R^d and their nets
"""

import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from lqlab.models.types import Array


class SetKind(str, Enum):
    """Geometric kind of an index set."""

    EUCLIDEAN_SPHERE = "euclidean_sphere"
    EUCLIDEAN_BALL = "euclidean_ball"
    L1_BALL = "l1_ball"
    SPARSE_SPHERE = "sparse_sphere"
    ELLIPSOID = "ellipsoid"
    FINITE = "finite"
    SCALED = "scaled"
    SECTION = "section"  # inner set intersected with a Euclidean sphere
    EMPTY = "empty"


class Metric(str, Enum):
    """Distance used on an index set."""

    L2 = "l2"
    PSI2_PROXY = "psi2_proxy"


class IndexSetSpec(BaseModel):
    """Geometric description of T defining F = {<., v> : v in T}."""

    model_config = ConfigDict(frozen=True)

    kind: SetKind
    dimension: int = Field(ge=1)
    radius: Optional[float] = Field(default=None, ge=0.0)
    sparsity: Optional[int] = Field(default=None, ge=1)
    semiaxes: Optional[tuple[float, ...]] = None
    points: Optional[tuple[tuple[float, ...], ...]] = None
    inner: Optional["IndexSetSpec"] = None
    factor: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def check_kind_fields(self) -> "IndexSetSpec":
        """Each kind carries exactly the fields it needs."""
        kind = self.kind
        if kind in (
            SetKind.EUCLIDEAN_SPHERE,
            SetKind.EUCLIDEAN_BALL,
            SetKind.L1_BALL,
            SetKind.SPARSE_SPHERE,
            SetKind.SECTION,
        ):
            if self.radius is None:
                raise ValueError(f"{kind.value} requires a radius")
            if math.isinf(self.radius) and kind != SetKind.EUCLIDEAN_BALL:
                raise ValueError(f"{kind.value} requires a finite radius")
        if kind == SetKind.SPARSE_SPHERE:
            if self.sparsity is None or self.sparsity > self.dimension:
                raise ValueError("sparse_sphere requires 1 <= sparsity <= dimension")
        if kind == SetKind.ELLIPSOID:
            if self.semiaxes is None or len(self.semiaxes) != self.dimension:
                raise ValueError("ellipsoid requires one semiaxis per dimension")
            if any(a < 0 or not math.isfinite(a) for a in self.semiaxes):
                raise ValueError("semiaxes must be finite and nonnegative")
        if kind == SetKind.FINITE:
            if not self.points:
                raise ValueError("finite set requires at least one point")
            if any(len(p) != self.dimension for p in self.points):
                raise ValueError("finite set points must match the dimension")
        if kind in (SetKind.SCALED, SetKind.SECTION):
            if self.inner is None or self.inner.dimension != self.dimension:
                raise ValueError(f"{kind.value} requires an inner set of equal dimension")
        if kind == SetKind.SCALED and self.factor is None:
            raise ValueError("scaled requires a factor")
        return self

    @classmethod
    def sphere(cls, dimension: int, radius: float = 1.0) -> "IndexSetSpec":
        return cls(kind=SetKind.EUCLIDEAN_SPHERE, dimension=dimension, radius=radius)

    @classmethod
    def ball(cls, dimension: int, radius: float = 1.0) -> "IndexSetSpec":
        return cls(kind=SetKind.EUCLIDEAN_BALL, dimension=dimension, radius=radius)

    @classmethod
    def l1_ball(cls, dimension: int, radius: float = 1.0) -> "IndexSetSpec":
        return cls(kind=SetKind.L1_BALL, dimension=dimension, radius=radius)

    @classmethod
    def sparse_sphere(
        cls, dimension: int, sparsity: int, radius: float = 1.0
    ) -> "IndexSetSpec":
        return cls(
            kind=SetKind.SPARSE_SPHERE,
            dimension=dimension,
            sparsity=sparsity,
            radius=radius,
        )

    @classmethod
    def ellipsoid(cls, semiaxes: list[float]) -> "IndexSetSpec":
        return cls(
            kind=SetKind.ELLIPSOID,
            dimension=len(semiaxes),
            semiaxes=tuple(float(a) for a in semiaxes),
        )

    @classmethod
    def finite(cls, points: list[list[float]]) -> "IndexSetSpec":
        pts = tuple(tuple(float(x) for x in p) for p in points)
        dimension = len(pts[0]) if pts else 0
        return cls(kind=SetKind.FINITE, dimension=dimension, points=pts)

    @classmethod
    def scaled(cls, inner: "IndexSetSpec", factor: float) -> "IndexSetSpec":
        return cls(
            kind=SetKind.SCALED, dimension=inner.dimension, inner=inner, factor=factor
        )

    @classmethod
    def section(cls, inner: "IndexSetSpec", radius: float) -> "IndexSetSpec":
        return cls(
            kind=SetKind.SECTION, dimension=inner.dimension, inner=inner, radius=radius
        )

    @classmethod
    def empty(cls, dimension: int) -> "IndexSetSpec":
        return cls(kind=SetKind.EMPTY, dimension=dimension)

    @property
    def is_empty(self) -> bool:
        return self.kind == SetKind.EMPTY


IndexSetSpec.model_rebuild()


class Net(BaseModel):
    """Finite subset G of a set with covering resolution eps."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    points: Array
    resolution: float = Field(gt=0.0)
    metric: Metric = Metric.L2
    complete: bool = True  # False when the point budget truncated packing

    @property
    def size(self) -> int:
        return int(self.points.shape[0])
