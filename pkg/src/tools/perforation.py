"""
Perforated domains D_ε = D minus the balls B_{ε^α r_i}(εz_i), z_i ∈ Φ^ε(D).

Builds the hole list from a marked sample, checks the separation property of
the safety balls, computes hole measures and answers membership queries. A
perforated domain can be written to and read back from a plain-text file so
that sweeps are replayable.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy.spatial.distance import pdist

from core.errors import GeometryError, ParameterError
from tools import regimes
from tools.models import (
    BallDomain,
    BoxDomain,
    DomainMeasures,
    DomainSpec,
    HoleMeasures,
    SeparationReport,
)
from tools.stochastic_geometry import MarkedSample, filter_phi_eps
from utils.spatial_index import UniformCellHash

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 1000
MAX_REPORTED_PAIRS = 100
FILE_HEADER = "# perforated-domain v1"


def _hole_index(centers: np.ndarray, radii: np.ndarray, tau: float = 2.0) -> UniformCellHash:
    # cell = max hole diameter * tau * 2
    rmax = float(radii.max()) if len(radii) else 0.0
    return UniformCellHash(centers, radii, cell_size=4.0 * tau * rmax)


@dataclass(frozen=True, eq=False)
class PerforatedDomain:
    domain: DomainSpec
    eps: float
    alpha: float
    centers: np.ndarray
    radii: np.ndarray
    spatial_index: UniformCellHash = field(repr=False)

    @property
    def hole_count(self) -> int:
        return len(self.radii)

    @classmethod
    def from_holes(
        cls,
        domain: DomainSpec,
        eps: float,
        alpha: float,
        centers,
        radii,
    ) -> "PerforatedDomain":
        centers = np.asarray(centers, dtype=float).reshape(-1, 3)
        radii = np.asarray(radii, dtype=float).reshape(len(centers))
        _check_exponents(eps, alpha)
        if np.any(radii < 0):
            raise ParameterError("hole radii must be nonnegative")
        if len(centers):
            ok = domain.contains(centers) & (domain.distance_to_boundary(centers) > eps)
            if not np.all(ok):
                bad = int(np.argmin(ok))
                raise GeometryError(
                    f"hole {bad} at {centers[bad].tolist()} violates the boundary-layer filter"
                )
        return cls(domain, eps, alpha, centers, radii, _hole_index(centers, radii))


def _check_exponents(eps: float, alpha: float):
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if not alpha > 2:
        raise ParameterError(f"alpha must exceed 2, got {alpha}")
    if alpha <= 3:
        logger.warning(f"alpha={alpha} <= 3: outside the subcritical regime")


def build_perforated(
    domain: DomainSpec, sample: MarkedSample, eps: float, alpha: float
) -> PerforatedDomain:
    _check_exponents(eps, alpha)
    kept = filter_phi_eps(sample, domain, eps)
    centers = eps * kept.points
    radii = eps**alpha * kept.radii
    logger.debug(f"eps={eps}: {len(kept)} of {len(sample)} centres survive the filter")
    return PerforatedDomain(domain, eps, alpha, centers, radii, _hole_index(centers, radii))


# ---------------------------------------------------------------- separation


def violating_pairs_exhaustive(centers: np.ndarray, distance: float) -> np.ndarray:
    """O(n²) oracle: index pairs (i < j) with centre distance <= `distance`."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    if len(centers) > EXHAUSTIVE_LIMIT:
        raise ParameterError(
            f"exhaustive oracle limited to {EXHAUSTIVE_LIMIT} centres, got {len(centers)}"
        )
    if len(centers) < 2:
        return np.empty((0, 2), dtype=np.int64)
    i, j = np.triu_indices(len(centers), 1)
    close = pdist(centers) <= distance
    return np.stack([i[close], j[close]], axis=1).astype(np.int64)


def check_separation(
    pd: PerforatedDomain,
    tau: float,
    kappa: float,
    m_r: float = math.inf,
    allow_inadmissible: bool = False,
) -> SeparationReport:
    if tau < 1:
        raise ParameterError(f"tau must be >= 1, got {tau}")
    lo, hi = regimes.kappa_interval(pd.alpha, m_r)
    admissible = lo < kappa < hi
    if not admissible:
        if not hi > lo:
            msg = (
                f"Empty admissible kappa interval ({lo:g}, {hi:g}) for alpha={pd.alpha}, "
                f"m_r={m_r}: requires alpha - 1 - 3/m_r > 1"
            )
        else:
            msg = f"kappa={kappa} outside the admissible interval ({lo:g}, {hi:g})"
        if not allow_inadmissible:
            raise ParameterError(msg)
        logger.warning(msg)

    threshold = pd.eps ** (1.0 + kappa)
    max_scaled = tau * float(pd.radii.max()) if pd.hole_count else 0.0
    safety = tau * threshold
    # Closed safety balls: touching counts as a violation
    index = UniformCellHash(pd.centers, cell_size=2.0 * safety)
    pairs = index.pairs_within(2.0 * safety)
    return SeparationReport(
        max_scaled_radius=max_scaled,
        threshold=threshold,
        radius_ok=max_scaled <= threshold,
        pair_violations=len(pairs),
        violating_pairs=[tuple(int(v) for v in p) for p in pairs[:MAX_REPORTED_PAIRS]],
        kappa_interval=(lo, hi),
        admissible=admissible,
    )


# ------------------------------------------------------------------ measures


def _overlapping_holes(pd: PerforatedDomain) -> int:
    if pd.hole_count < 2 or not pd.radii.max() > 0:
        return 0
    rmax = float(pd.radii.max())
    index = UniformCellHash(pd.centers, cell_size=2.0 * rmax)
    pairs = index.pairs_within(2.0 * rmax)
    if len(pairs) == 0:
        return 0
    d = np.linalg.norm(pd.centers[pairs[:, 0]] - pd.centers[pairs[:, 1]], axis=1)
    return int(np.count_nonzero(d < pd.radii[pairs[:, 0]] + pd.radii[pairs[:, 1]]))


def hole_measures(pd: PerforatedDomain) -> HoleMeasures:
    volume = math.fsum(4.0 * math.pi / 3.0 * pd.radii**3)
    surface = math.fsum(4.0 * math.pi * pd.radii**2)
    overlaps = _overlapping_holes(pd)
    if overlaps:
        logger.warning(f"{overlaps} overlapping hole pairs: measures are upper bounds")
    return HoleMeasures(
        total_volume=volume,
        total_surface=surface,
        hole_count=pd.hole_count,
        exact=overlaps == 0,
    )


def domain_measures(pd: PerforatedDomain) -> DomainMeasures:
    holes = hole_measures(pd)
    return DomainMeasures(
        perforated_volume=pd.domain.volume - holes.total_volume,
        perforated_surface=pd.domain.surface_area + holes.total_surface,
        doubled_ball_volume_bound=8.0 * holes.total_volume,
        exact=holes.exact,
    )


# ---------------------------------------------------------------- membership


def contains_many(pd: PerforatedDomain, points) -> np.ndarray:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    inside = pd.domain.contains(points)
    qi, items = pd.spatial_index.candidates(points)
    if len(qi):
        d = np.linalg.norm(points[qi] - pd.centers[items], axis=1)
        in_hole = d <= pd.radii[items]
        inside[qi[in_hole]] = False
    return inside


def contains(pd: PerforatedDomain, x) -> bool:
    """True iff x ∈ D and x lies outside every closed hole."""
    return bool(contains_many(pd, x)[0])


def contains_exhaustive(pd: PerforatedDomain, x) -> bool:
    x = np.asarray(x, dtype=float)
    if not pd.domain.contains(x):
        return False
    if pd.hole_count == 0:
        return True
    return bool(np.all(np.linalg.norm(pd.centers - x, axis=1) > pd.radii))


# ------------------------------------------------------------- serialization


def write_perforated(pd: PerforatedDomain, path: Union[str, Path]) -> Path:
    path = Path(path)
    if isinstance(pd.domain, BallDomain):
        domain_line = f"domain ball {pd.domain.radius!r}"
    else:
        domain_line = "domain box " + " ".join(repr(h) for h in pd.domain.half_widths)
    lines = [
        FILE_HEADER,
        domain_line,
        f"eps {pd.eps!r}",
        f"alpha {pd.alpha!r}",
        f"holes {pd.hole_count}",
    ]
    for (x, y, z), r in zip(pd.centers.tolist(), pd.radii.tolist()):
        lines.append(f"{x!r} {y!r} {z!r} {r!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_perforated(path: Union[str, Path]) -> PerforatedDomain:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParameterError(f"Cannot read perforated domain {path}: {e}") from e
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != FILE_HEADER:
        raise ParameterError(f"{path}: missing '{FILE_HEADER}' header")
    header = {}
    for line in lines[1:5]:
        key, _, rest = line.partition(" ")
        header[key] = rest.split()
    try:
        kind, *dims = header["domain"]
        domain: DomainSpec
        if kind == "ball":
            domain = BallDomain(radius=float(dims[0]))
        elif kind == "box":
            domain = BoxDomain(half_widths=tuple(float(v) for v in dims))
        else:
            raise ParameterError(f"{path}: unknown domain shape '{kind}'")
        eps = float(header["eps"][0])
        alpha = float(header["alpha"][0])
        n = int(header["holes"][0])
    except (KeyError, IndexError, ValueError) as e:
        raise ParameterError(f"{path}: malformed header ({e})") from e

    try:
        rows = [list(map(float, line.split())) for line in lines[5:]]
    except ValueError as e:
        raise ParameterError(f"{path}: non-numeric hole line ({e})") from e
    if len(rows) != n or any(len(r) != 4 for r in rows):
        raise ParameterError(f"{path}: expected {n} hole lines of 'x y z radius'")
    data = np.asarray(rows, dtype=float).reshape(n, 4)
    return PerforatedDomain.from_holes(domain, eps, alpha, data[:, :3], data[:, 3])
