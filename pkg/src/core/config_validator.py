import logging
from typing import List, Optional

from core.config_loader import RunConfig, Settings
from core.errors import ParameterError
from tools import regimes

logger = logging.getLogger(__name__)


class SettingsValidator:
    def __init__(self, settings: Settings):
        self.settings = settings

    def validate(self):
        self._validate_required("OUTPUT_DIR", self.settings.OUTPUT_DIR)
        self._validate_positive("MAX_EXPECTED_POINTS", self.settings.MAX_EXPECTED_POINTS)
        self._validate_positive("MAX_GRID_CELLS", self.settings.MAX_GRID_CELLS)
        self._validate_positive("SOLVER_RTOL", self.settings.SOLVER_RTOL)
        self._validate_positive(
            "SOLVER_MAX_ITERATIONS", self.settings.SOLVER_MAX_ITERATIONS
        )
        self._validate_positive("SOLVER_RESTARTS", self.settings.SOLVER_RESTARTS)
        self._validate_positive("SWEEP_WORKERS", self.settings.SWEEP_WORKERS)
        self._validate_positive("MC_SAMPLES", self.settings.MC_SAMPLES)

    def _validate_required(self, name: str, value):
        if not value:
            raise ValueError(f"{name} is required")

    def _validate_positive(self, name: str, value):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")


class RunConfigValidator:
    """Cross-field checks that the pydantic schema cannot express on its own."""

    def __init__(self, config: RunConfig):
        self.config = config

    def validate(self):
        cfg = self.config
        self._validate_eps_list("perforation.eps", cfg.perforation.eps)
        self._validate_eps_list("slln.eps", cfg.slln.eps)
        self._validate_eps_list("cutoff.eps", cfg.cutoff.eps)
        self._validate_eps_list("proxy.eps", cfg.proxy.eps)
        if not cfg.perforation.alpha > 2:
            raise ParameterError(
                f"alpha must exceed 2 (got {cfg.perforation.alpha})"
            )
        if not 1.0 < cfg.cutoff.q < 3.0:
            raise ParameterError(f"cutoff.q must lie in (1, 3), got {cfg.cutoff.q}")
        if any(m < 0 for m in cfg.slln.m):
            raise ParameterError("slln.m values must be nonnegative")
        lo, hi = regimes.kappa_interval(cfg.perforation.alpha, cfg.moment_exponent())
        if not hi > lo and not cfg.perforation.allow_inadmissible:
            raise ParameterError(
                f"Empty admissible kappa interval ({lo:g}, {hi:g}): "
                "requires alpha - 1 - 3/m_r > 1"
            )
        if not cfg.domain.is_c2:
            logger.warning("Box domain has no C2 boundary; results are flagged")

    def _validate_eps_list(self, name: str, values: Optional[List[float]]):
        if values is None:
            return
        if not values:
            raise ParameterError(f"{name} must not be empty")
        if any(not e > 0 for e in values):
            raise ParameterError(f"{name} must contain positive values only")
        if any(b >= a for a, b in zip(values, values[1:])):
            raise ParameterError(f"{name} must be strictly decreasing")
