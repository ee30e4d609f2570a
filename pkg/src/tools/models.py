"""
Pydantic data models for the perforation verification tools.

Defines the radius laws, ambient domains and process parameters used to draw
marked Poisson samples, plus the report / row payloads produced by the
separation, measure, SLLN, cutoff, rate and proxy-solver tools.
"""
import math
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)


class _FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ---------------------------------------------------------------- radius laws


class ConstantRadius(_FrozenModel):
    # Every mark equals `value`
    law: Literal["constant"] = "constant"
    value: float = Field(1.0, ge=0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.value, dtype=float)

    def moment(self, m: float) -> float:
        return self.value**m

    @property
    def moment_supremum(self) -> float:
        return math.inf

    @property
    def typical_radius(self) -> float:
        return self.value


class UniformRadius(_FrozenModel):
    # Marks uniform on [low, high)
    law: Literal["uniform"] = "uniform"
    low: float = Field(0.0, ge=0.0)
    high: float = 1.0

    @model_validator(mode="after")
    def _check_order(self):
        if not self.high > self.low:
            raise ValueError("uniform radius law needs high > low")
        return self

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size)

    def moment(self, m: float) -> float:
        a, b = self.low, self.high
        return (b ** (m + 1) - a ** (m + 1)) / ((m + 1) * (b - a))

    @property
    def moment_supremum(self) -> float:
        return math.inf

    @property
    def typical_radius(self) -> float:
        return 0.5 * (self.low + self.high)


class ParetoRadius(_FrozenModel):
    # Classical Pareto: P(r > x) = (scale / x)^shape for x >= scale
    law: Literal["pareto"] = "pareto"
    shape: float = Field(..., gt=0.0)
    scale: float = Field(1.0, gt=0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # numpy draws the Lomax form; shift by one to get the classical law
        return self.scale * (1.0 + rng.pareto(self.shape, size))

    def moment(self, m: float) -> float:
        if m >= self.shape:
            return math.inf
        return self.shape * self.scale**m / (self.shape - m)

    @property
    def moment_supremum(self) -> float:
        return self.shape

    @property
    def typical_radius(self) -> float:
        return self.scale


RadiusLaw = Annotated[
    Union[ConstantRadius, UniformRadius, ParetoRadius], Field(discriminator="law")
]


# ------------------------------------------------------------ ambient domains


class _DomainBase(_FrozenModel):
    def signed_distance(self, x) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x) -> np.ndarray:
        return self.signed_distance(x) < 0.0

    def distance_to_boundary(self, x) -> np.ndarray:
        return np.abs(self.signed_distance(x))

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        half = np.asarray(self.half_extent, dtype=float)
        return -half, half


class BallDomain(_DomainBase):
    shape: Literal["ball"] = "ball"
    radius: float = Field(1.0, gt=0.0)

    def signed_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x, axis=-1) - self.radius

    @property
    def volume(self) -> float:
        return 4.0 * math.pi / 3.0 * self.radius**3

    @property
    def surface_area(self) -> float:
        return 4.0 * math.pi * self.radius**2

    @property
    def half_extent(self) -> Tuple[float, float, float]:
        return (self.radius,) * 3

    @property
    def is_c2(self) -> bool:
        return True

    def scaled(self, factor: float) -> "BallDomain":
        return BallDomain(radius=self.radius * factor)


class BoxDomain(_DomainBase):
    shape: Literal["box"] = "box"
    half_widths: Tuple[float, float, float] = (0.5, 0.5, 0.5)

    @field_validator("half_widths")
    @classmethod
    def _positive(cls, value):
        if any(not h > 0 for h in value):
            raise ValueError("box half-widths must be positive")
        return value

    def signed_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        q = np.abs(x) - np.asarray(self.half_widths)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    @property
    def volume(self) -> float:
        h1, h2, h3 = self.half_widths
        return 8.0 * h1 * h2 * h3

    @property
    def surface_area(self) -> float:
        h1, h2, h3 = self.half_widths
        return 8.0 * (h1 * h2 + h2 * h3 + h1 * h3)

    @property
    def half_extent(self) -> Tuple[float, float, float]:
        return tuple(self.half_widths)

    @property
    def is_c2(self) -> bool:
        # Edges and corners; kept for convenience and flagged in reports
        return False

    def scaled(self, factor: float) -> "BoxDomain":
        return BoxDomain(half_widths=tuple(h * factor for h in self.half_widths))


DomainSpec = Annotated[Union[BallDomain, BoxDomain], Field(discriminator="shape")]


class ProcessParams(_FrozenModel):
    # λ = 0 is the empty process (used as a control by the proxy sweep)
    intensity: float = Field(1.0, ge=0.0)
    radius_law: RadiusLaw = Field(default_factory=ConstantRadius)
    seed: int = Field(0, ge=0, lt=2**64)

    @field_validator("intensity")
    @classmethod
    def _finite(cls, value):
        if not math.isfinite(value):
            raise ValueError("intensity must be finite")
        return value


# ------------------------------------------------------------ reports and rows


class SeparationReport(_FrozenModel):
    max_scaled_radius: float
    threshold: float
    radius_ok: bool
    pair_violations: int
    violating_pairs: List[Tuple[int, int]] = []
    kappa_interval: Tuple[float, float]
    admissible: bool = True

    @computed_field
    @property
    def passed(self) -> bool:
        return self.radius_ok and self.pair_violations == 0


class HoleMeasures(_FrozenModel):
    total_volume: float
    total_surface: float
    hole_count: int
    # False when holes overlap: the sums are then upper bounds only
    exact: bool = True


class DomainMeasures(_FrozenModel):
    perforated_volume: float
    perforated_surface: float
    doubled_ball_volume_bound: float
    exact: bool = True


class SllnRow(_FrozenModel):
    eps: float
    m: float
    n_seeds: int
    mean_scaled_count: float
    se_count: float
    target_count: float
    mean_scaled_moment: float
    se_moment: float
    target_moment: float
    rel_err_count: float
    rel_err_moment: float


class CutoffNorms(_FrozenModel):
    lq_part: float
    grad_part: float
    rate_defined: bool = True

    @computed_field
    @property
    def w1q_norm(self) -> float:
        return self.lq_part + self.grad_part


class CutoffRateRow(_FrozenModel):
    eps: float
    lq_part: float
    grad_part: float
    w1q_norm: float
    target_sigma: float
    seeds_used: int


class RateFit(_FrozenModel):
    slope: float
    intercept: float
    r_squared: float
    residual_rms: float
    n_points: int
    target_exponent: Optional[float] = None
    tolerance: Optional[float] = None
    # "two_sided": |slope - target| <= tol; "at_least": slope >= target - tol
    mode: Literal["two_sided", "at_least"] = "two_sided"

    @computed_field
    @property
    def passed(self) -> Optional[bool]:
        if self.target_exponent is None or self.tolerance is None:
            return None
        if self.mode == "at_least":
            return self.slope >= self.target_exponent - self.tolerance
        return abs(self.slope - self.target_exponent) <= self.tolerance


class ProxyProblem(_FrozenModel):
    conductivity: float = Field(1.0, gt=0.0)
    robin_coefficient: float = Field(1.0, gt=0.0)
    # Affine boundary datum θ₀(x) = theta0_value + theta0_gradient · x
    theta0_value: float = 1.0
    theta0_gradient: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    min_temperature: float = Field(1e-3, gt=0.0)
    source: float = 0.0
    grid_spacing: Optional[float] = Field(None, gt=0.0)
    insulated_axes: Tuple[int, ...] = ()
    # Carried for the trace check only
    m_theta: float = Field(3.0, gt=0.0)

    @field_validator("insulated_axes")
    @classmethod
    def _axes(cls, value):
        if any(a not in (0, 1, 2) for a in value):
            raise ValueError("insulated axes must be among 0, 1, 2")
        return tuple(sorted(set(value)))

    def boundary_datum(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.theta0_value + points @ np.asarray(self.theta0_gradient)


class TraceNorm(_FrozenModel):
    value: float
    p: float
    holes_used: int
    holes_excluded: int


class HomogenizationRow(_FrozenModel):
    eps: float
    distance: float
    distance_se: float
    hole_count: float
    dropped_holes: float
    grid_spacing: float
    interior_cells: int
    trace_norm: Optional[float] = None
