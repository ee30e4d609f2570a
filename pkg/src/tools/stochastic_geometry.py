"""
Marked Poisson point process sampling and the boundary-layer filter Φ^ε(D).

Every draw is keyed on (seed, trial): the generator is a counter-based Philox
stream seeded from that pair, so sweeps give bit-identical samples whatever
the number of worker threads.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from core.errors import ParameterError, ResourceError
from tools.models import DomainSpec, ProcessParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MarkedSample:
    points: np.ndarray
    radii: np.ndarray
    region: DomainSpec
    seed: int
    trial: int

    def __len__(self) -> int:
        return len(self.points)


def make_rng(seed: int, trial: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def sample_count(intensity: float, volume: float, rng: np.random.Generator) -> int:
    mean = intensity * volume
    if not math.isfinite(mean) or mean < 0:
        raise ParameterError(f"Poisson mean must be finite and nonnegative, got {mean}")
    if mean == 0:
        return 0
    return int(rng.poisson(mean))


def sample_marked(
    params: ProcessParams,
    region: DomainSpec,
    trial: int = 0,
    max_expected_points: float = math.inf,
) -> MarkedSample:
    """Draw Poisson-many uniform centres in `region` with i.i.d. radius marks.

    Centres are drawn on the bounding box and rejected into the region, which
    is exact for Ball and Box shapes. Radii are drawn after the centres so
    they are independent of the locations.
    """
    lo, hi = region.bounding_box()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ParameterError("Sampling region must be bounded")
    box_volume = float(np.prod(hi - lo))
    expected = params.intensity * box_volume
    if expected > max_expected_points:
        raise ResourceError(
            f"Expected {expected:.3g} points exceeds the cap of {max_expected_points:.3g}"
        )

    rng = make_rng(params.seed, trial)
    n = sample_count(params.intensity, box_volume, rng)
    points = rng.uniform(lo, hi, size=(n, 3))
    points = points[region.contains(points)]
    radii = params.radius_law.sample(rng, len(points))
    return MarkedSample(
        points=points, radii=radii, region=region, seed=params.seed, trial=trial
    )


def filter_phi_eps(sample: MarkedSample, domain: DomainSpec, eps: float) -> MarkedSample:
    # Keep z with εz ∈ D and dist(εz, ∂D) > ε
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    scaled = eps * sample.points
    keep = domain.contains(scaled) & (domain.distance_to_boundary(scaled) > eps)
    return MarkedSample(
        points=sample.points[keep],
        radii=sample.radii[keep],
        region=sample.region,
        seed=sample.seed,
        trial=sample.trial,
    )
