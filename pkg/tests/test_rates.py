import numpy as np
import pytest

from core.errors import ParameterError
from tools.rates import fit_rate

EPS_SQUARED = [(0.1, 0.01), (0.05, 0.0025), (0.025, 0.000625)]


def test_exact_power_law():
    fit = fit_rate(EPS_SQUARED)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.n_points == 3
    assert fit.passed is None


def test_constant_ordinates_have_zero_slope():
    fit = fit_rate([(0.1, 3.0), (0.05, 3.0), (0.025, 3.0), (0.01, 3.0)])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == 1.0


def test_perturbed_power_law_slope():
    eps = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    delta = np.array([0.01, -0.01, 0.01, -0.01, 0.01])
    fit = fit_rate(list(zip(eps, 3.0 * eps**2.5 * (1.0 + delta))), target=2.5, tol=0.1)
    assert 2.4 <= fit.slope <= 2.6
    assert fit.passed


def test_scaling_ordinates_changes_only_the_intercept():
    base = fit_rate(EPS_SQUARED)
    scaled = fit_rate([(e, 7.5 * y) for e, y in EPS_SQUARED])
    assert scaled.slope == pytest.approx(base.slope, abs=1e-12)
    assert scaled.intercept == pytest.approx(base.intercept + np.log(7.5))


def test_input_order_does_not_matter():
    pairs = [(0.2, 0.9), (0.1, 0.5), (0.05, 0.2), (0.02, 0.11)]
    forward = fit_rate(pairs)
    backward = fit_rate(pairs[::-1])
    assert forward.slope == backward.slope
    assert forward.intercept == backward.intercept


def test_tolerance_modes():
    two_sided = fit_rate(EPS_SQUARED, target=2.5, tol=0.2)
    assert not two_sided.passed
    at_least = fit_rate(EPS_SQUARED, target=1.0, tol=0.2, mode="at_least")
    assert at_least.passed


@pytest.mark.parametrize(
    "pairs",
    [
        [(0.1, 0.01), (0.05, 0.0025)],
        [(0.1, 0.01), (0.05, 0.0), (0.025, 0.000625)],
        [(0.1, 0.01), (-0.05, 0.0025), (0.025, 0.000625)],
        [(0.1, 0.01), (0.1, 0.0025), (0.025, 0.000625)],
        [(0.1, 0.01), (0.05, float("nan")), (0.025, 0.000625)],
    ],
)
def test_invalid_data_is_rejected(pairs):
    with pytest.raises(ParameterError):
        fit_rate(pairs)
