"""
Parameter-regime conditions for randomly perforated domains.

Each helper evaluates one inequality on (α, m_r, q, γ, m_θ); `regime_report`
collects them into a single report for the `regimes` subcommand. m_r may be
`math.inf` (bounded radii), in which case 3/m_r is taken as 0.
"""
import math
from typing import List, Tuple

from pydantic import BaseModel

from core.errors import ParameterError


def _inv(m_r: float) -> float:
    return 0.0 if math.isinf(m_r) else 1.0 / m_r


def moment_condition(alpha: float, m_r: float) -> bool:
    # m_r > 3/(α-2)
    return alpha > 2 and m_r > 3.0 / (alpha - 2.0)


def kappa_interval(alpha: float, m_r: float) -> Tuple[float, float]:
    # δ is not modelled separately, so the lower end is max(1, δ) -> 1
    return 1.0, alpha - 1.0 - 3.0 * _inv(m_r)


def kappa_admissible(alpha: float, m_r: float, kappa: float) -> bool:
    lo, hi = kappa_interval(alpha, m_r)
    return lo < kappa < hi


def divergence_inverse_condition(alpha: float, m_r: float, q: float) -> bool:
    # α - 3/m_r > 3/(3-q)
    return 1.0 < q < 3.0 and alpha - 3.0 * _inv(m_r) > 3.0 / (3.0 - q)


def cutoff_sigma(alpha: float, q: float) -> float:
    if not 1.0 < q < 3.0:
        raise ParameterError(f"q must lie in (1, 3), got {q}")
    return ((3.0 - q) * alpha - 3.0) / q


def cutoff_conditions(alpha: float, m_r: float, q: float) -> bool:
    return (
        alpha > 2
        and m_r > max(3.0 / (alpha - 2.0), 3.0)
        and (3.0 - q) * alpha - 3.0 > 0
    )


def main_theorem_conditions(alpha: float, m_r: float, gamma: float, m_theta: float) -> bool:
    if not (alpha > 3 and gamma > 2 and m_theta > 2):
        return False
    if not m_r > max(3.0 / (alpha - 3.0), 3.0):
        return False
    bound = max((2 * gamma - 3) / (gamma - 2), (3 * m_theta - 2) / (m_theta - 2))
    return alpha - 3.0 * _inv(m_r) > bound


def volume_exponent(alpha: float) -> float:
    return 3.0 * (alpha - 1.0)


def surface_exponent(alpha: float) -> float:
    return 2.0 * alpha - 3.0


def trace_exponent(m_theta: float) -> float:
    return -1.0 / (2.0 * m_theta)


class RegimeCheck(BaseModel):
    name: str
    statement: str
    holds: bool


class RegimeReport(BaseModel):
    alpha: float
    m_r: float
    q: float
    gamma: float
    m_theta: float
    checks: List[RegimeCheck]
    sigma: float
    volume_exponent: float
    surface_exponent: float
    trace_exponent: float

    @property
    def main_theorem_holds(self) -> bool:
        return next(c.holds for c in self.checks if c.name == "main_theorem")


def regime_report(alpha: float, m_r: float, q: float, gamma: float, m_theta: float) -> RegimeReport:
    lo, hi = kappa_interval(alpha, m_r)
    checks = [
        RegimeCheck(
            name="moment",
            statement=f"m_r > 3/(alpha-2) = {3.0 / (alpha - 2.0):.4g}",
            holds=moment_condition(alpha, m_r),
        ),
        RegimeCheck(
            name="kappa_interval",
            statement=f"kappa interval ({lo:.4g}, {hi:.4g}) non-empty",
            holds=hi > lo,
        ),
        RegimeCheck(
            name="subcritical",
            statement="alpha > 3",
            holds=alpha > 3,
        ),
        RegimeCheck(
            name="divergence_inverse",
            statement=f"alpha - 3/m_r > 3/(3-q) = {3.0 / (3.0 - q):.4g}",
            holds=divergence_inverse_condition(alpha, m_r, q),
        ),
        RegimeCheck(
            name="cutoff",
            statement="m_r > max(3/(alpha-2), 3) and (3-q)alpha - 3 > 0",
            holds=cutoff_conditions(alpha, m_r, q),
        ),
        RegimeCheck(
            name="main_theorem",
            statement=(
                "alpha > 3, gamma > 2, m_theta > 2, m_r > max(3/(alpha-3), 3), "
                "alpha - 3/m_r > max((2gamma-3)/(gamma-2), (3m_theta-2)/(m_theta-2))"
            ),
            holds=main_theorem_conditions(alpha, m_r, gamma, m_theta),
        ),
    ]
    return RegimeReport(
        alpha=alpha,
        m_r=m_r,
        q=q,
        gamma=gamma,
        m_theta=m_theta,
        checks=checks,
        sigma=cutoff_sigma(alpha, q),
        volume_exponent=volume_exponent(alpha),
        surface_exponent=surface_exponent(alpha),
        trace_exponent=trace_exponent(m_theta),
    )
