import math

import pytest

from core.errors import ParameterError
from tools import regimes


def test_kappa_interval():
    assert regimes.kappa_interval(4.0, math.inf) == (1.0, 3.0)
    lo, hi = regimes.kappa_interval(4.0, 1.5)
    assert hi <= lo
    assert regimes.kappa_admissible(4.0, math.inf, 1.5)
    assert not regimes.kappa_admissible(4.0, math.inf, 3.0)


def test_moment_condition():
    assert regimes.moment_condition(4.0, 2.0)
    assert not regimes.moment_condition(4.0, 1.5)


def test_cutoff_sigma():
    assert regimes.cutoff_sigma(4.0, 2.0) == pytest.approx(0.5)
    assert regimes.cutoff_sigma(5.0, 2.0) == pytest.approx(1.0)
    assert regimes.cutoff_sigma(4.0, 2.9) < 0
    with pytest.raises(ParameterError):
        regimes.cutoff_sigma(4.0, 3.0)


def test_exponents():
    assert regimes.volume_exponent(4.0) == 9.0
    assert regimes.surface_exponent(4.0) == 5.0
    assert regimes.trace_exponent(3.0) == pytest.approx(-1.0 / 6.0)


def test_regime_report_main_theorem():
    report = regimes.regime_report(alpha=4.0, m_r=math.inf, q=2.0, gamma=2.5, m_theta=3.0)
    assert not report.main_theorem_holds
    assert report.sigma == pytest.approx(0.5)
    report = regimes.regime_report(alpha=8.0, m_r=math.inf, q=2.0, gamma=2.5, m_theta=3.0)
    assert report.main_theorem_holds
    names = {c.name for c in report.checks}
    assert {"moment", "kappa_interval", "cutoff", "main_theorem"} <= names
