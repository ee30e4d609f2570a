"""
Empirical strong-law checks for marked Poisson samples.

For each ε the sweep draws `n_seeds` independent samples on ε⁻¹S and reports
the seed-mean of ε³N(ε⁻¹S) and ε³Σ r^m next to their limits λ|S| and
λE(r^m)|S|. With `filtered=True` only the centres in Φ^ε(S) are counted.
"""
import logging
import math
from functools import partial
from typing import List, Sequence, Tuple

import numpy as np

from core.errors import ParameterError, ResourceError
from tools.models import DomainSpec, ProcessParams, RadiusLaw, RateFit, SllnRow
from tools.rates import fit_rate
from tools.stochastic_geometry import filter_phi_eps, sample_marked
from utils.workflow_utils import aggregate_mean_se, fan_out_seeds

logger = logging.getLogger(__name__)

DEFAULT_MAX_EXPECTED_POINTS = 5e7


def analytic_moment(radius_law: RadiusLaw, m: float) -> float:
    if not m > 0:
        raise ParameterError(f"moment order must be positive, got {m}")
    return radius_law.moment(m)


def _relative_error(mean: float, target: float) -> float:
    if math.isinf(target):
        return math.inf
    return abs(mean - target) / target


def _scaled_sums(
    params: ProcessParams,
    region: DomainSpec,
    eps: float,
    m: float,
    filtered: bool,
    trial: int,
) -> Tuple[float, float]:
    sample = sample_marked(params, region.scaled(1.0 / eps), trial=trial)
    if filtered:
        sample = filter_phi_eps(sample, region, eps)
    scale = eps**3
    moment_sum = math.fsum(sample.radii**m) if m != 0 else float(len(sample))
    return scale * len(sample), scale * moment_sum


def slln_sweep(
    params: ProcessParams,
    region: DomainSpec,
    eps_list: Sequence[float],
    m: float,
    n_seeds: int,
    filtered: bool = False,
    max_expected_points: float = DEFAULT_MAX_EXPECTED_POINTS,
    workers: int = 1,
) -> List[SllnRow]:
    if n_seeds < 1:
        raise ParameterError("n_seeds must be at least 1")
    if not params.intensity > 0:
        raise ParameterError("SLLN sweep needs a positive intensity")
    if m < 0:
        raise ParameterError(f"moment order must be nonnegative, got {m}")
    eps_list = list(eps_list)
    if any(not e > 0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ParameterError("eps list must be positive and strictly decreasing")

    target_count = params.intensity * region.volume
    target_moment = target_count * (1.0 if m == 0 else analytic_moment(params.radius_law, m))

    rows = []
    for eps in eps_list:
        scaled_region = region.scaled(1.0 / eps)
        expected = params.intensity * scaled_region.volume
        if expected > max_expected_points:
            raise ResourceError(
                f"eps={eps}: expected {expected:.3g} points exceeds the cap "
                f"of {max_expected_points:.3g}"
            )

        task = partial(_scaled_sums, params, region, eps, m, filtered)
        results = fan_out_seeds(task, n_seeds, workers)
        mean_count, se_count = aggregate_mean_se([c for c, _ in results])
        mean_moment, se_moment = aggregate_mean_se([s for _, s in results])
        rows.append(
            SllnRow(
                eps=eps,
                m=m,
                n_seeds=n_seeds,
                mean_scaled_count=mean_count,
                se_count=se_count,
                target_count=target_count,
                mean_scaled_moment=mean_moment,
                se_moment=se_moment,
                target_moment=target_moment,
                rel_err_count=_relative_error(mean_count, target_count),
                rel_err_moment=_relative_error(mean_moment, target_moment),
            )
        )
        logger.info(
            f"slln eps={eps} m={m}: count {mean_count:.5g}±{se_count:.2g} "
            f"(target {target_count:.5g})"
        )
    return rows


def within_band(row: SllnRow, band: float = 4.0) -> bool:
    """Seed-mean count and moment each within `band` standard errors of the limit."""
    ok_count = abs(row.mean_scaled_count - row.target_count) <= band * row.se_count
    if math.isinf(row.target_moment):
        return ok_count
    ok_moment = abs(row.mean_scaled_moment - row.target_moment) <= band * row.se_moment
    return ok_count and ok_moment


def error_trend(rows: Sequence[SllnRow], which: str = "count") -> RateFit:
    """Slope of log(relative error) against log ε; positive when errors shrink."""
    attr = "rel_err_count" if which == "count" else "rel_err_moment"
    pairs = [
        (r.eps, getattr(r, attr))
        for r in rows
        if getattr(r, attr) > 0 and np.isfinite(getattr(r, attr))
    ]
    return fit_rate(pairs)
