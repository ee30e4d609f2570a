"""
Log-log power-law fitting shared by every ε-sweep.

`fit_rate` runs ordinary least squares on (log ε, log y); the slope is the
exponent in y ≈ C ε^slope. Constants are never verified, only slopes.
"""
import logging
import math
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from core.errors import ParameterError
from tools.models import RateFit

logger = logging.getLogger(__name__)


def fit_rate(
    pairs: Sequence[Tuple[float, float]],
    target: Optional[float] = None,
    tol: float = 0.1,
    mode: Literal["two_sided", "at_least"] = "two_sided",
) -> RateFit:
    data = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if len(data) < 3:
        raise ParameterError(f"fit needs at least 3 points, got {len(data)}")
    eps, y = data[:, 0], data[:, 1]
    if not (np.all(np.isfinite(data)) and np.all(eps > 0) and np.all(y > 0)):
        raise ParameterError("fit data must be finite and strictly positive")
    if len(np.unique(eps)) != len(eps):
        raise ParameterError("fit data contains duplicate eps values")

    # Sort so the result does not depend on the input order
    order = np.argsort(eps)
    log_eps, log_y = np.log(eps[order]), np.log(y[order])
    fit = linregress(log_eps, log_y)
    residuals = log_y - (fit.intercept + fit.slope * log_eps)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((log_y - log_y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=min(max(r_squared, 0.0), 1.0),
        residual_rms=math.sqrt(ss_res / len(data)),
        n_points=len(data),
        target_exponent=target,
        tolerance=tol if target is not None else None,
        mode=mode,
    )
