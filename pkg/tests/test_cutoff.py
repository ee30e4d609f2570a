import logging
import math

import numpy as np
import pytest
from scipy.integrate import quad

from core.errors import GeometryError, ParameterError
from tools.cutoff import (
    RAMP_SLOPE_MAX,
    CutoffProfile,
    cutoff_gradients,
    cutoff_norms,
    cutoff_value,
    cutoff_values,
    monte_carlo_gradient_integral,
    smoothstep,
    smoothstep_slope,
    verify_cutoff_rate,
)
from tools.models import BallDomain, ConstantRadius, ProcessParams
from tools.perforation import PerforatedDomain, build_perforated
from tools.stochastic_geometry import make_rng, sample_marked

BIG_BALL = BallDomain(radius=10.0)


def _single_hole(a=1.0):
    return PerforatedDomain.from_holes(BIG_BALL, 0.5, 4.0, [[0.0, 0.0, 0.0]], [a])


def test_smoothstep_endpoints():
    assert smoothstep(0.0) == 0.0
    assert smoothstep(1.0) == 1.0
    assert smoothstep(0.5) == 0.5
    assert smoothstep_slope(0.0) == 0.0
    assert smoothstep_slope(1.0) == 0.0
    assert smoothstep_slope(0.5) == pytest.approx(RAMP_SLOPE_MAX)
    assert np.all(smoothstep_slope(np.linspace(0.0, 1.0, 1001)) <= RAMP_SLOPE_MAX)


def test_gradient_profile_constant_matches_exact_value():
    assert CutoffProfile(2.0).k1 == pytest.approx(96.0 / 35.0, abs=1e-10)


def test_profile_constants_positive_across_q():
    for q in (1.1, 1.5, 2.0, 2.5, 2.9):
        profile = CutoffProfile(q)
        assert profile.k0 > 0 and profile.k1 > 0


@pytest.mark.parametrize("q", [1.0, 3.0, 0.5])
def test_profile_rejects_q_outside_open_interval(q):
    with pytest.raises(ParameterError):
        CutoffProfile(q)


def test_pointwise_values_for_one_hole():
    pd = _single_hole(1.0)
    profile = CutoffProfile(2.0)
    assert cutoff_value(pd, profile, [0.0, 0.0, 0.0]) == 0.0
    assert cutoff_value(pd, profile, [0.9, 0.0, 0.0]) == 0.0
    assert cutoff_value(pd, profile, [1.5, 0.0, 0.0]) == pytest.approx(0.5)
    assert cutoff_value(pd, profile, [0.0, 5.0, 0.0]) == 1.0


def test_single_hole_gradient_norm_closed_form():
    norms = cutoff_norms(_single_hole(1.0), CutoffProfile(2.0))
    assert norms.grad_part**2 == pytest.approx(384.0 * math.pi / 35.0, rel=1e-10)
    assert norms.w1q_norm == pytest.approx(norms.lq_part + norms.grad_part)


def test_closed_forms_match_radial_integrals_of_the_field():
    a, q = 0.7, 2.0
    pd = _single_hole(a)
    profile = CutoffProfile(q)

    def one_minus_g(rho):
        return (1.0 - cutoff_value(pd, profile, [rho, 0.0, 0.0])) ** q * 4.0 * math.pi * rho**2

    def grad(rho):
        g = cutoff_gradients(pd, profile, [[rho, 0.0, 0.0]])[0]
        return np.linalg.norm(g) ** q * 4.0 * math.pi * rho**2

    lq, _ = quad(one_minus_g, 0.0, 2.0 * a, points=[a], epsabs=1e-12)
    gq, _ = quad(grad, 0.0, 2.0 * a, points=[a], epsabs=1e-12)
    norms = cutoff_norms(pd, profile)
    assert norms.lq_part**q == pytest.approx(lq, rel=1e-8)
    assert norms.grad_part**q == pytest.approx(gq, rel=1e-8)


def test_zero_holes_give_zero_norms(unit_ball):
    pd = PerforatedDomain.from_holes(unit_ball, 0.1, 4.0, np.empty((0, 3)), [])
    norms = cutoff_norms(pd, CutoffProfile(2.0))
    assert norms.lq_part == 0.0 and norms.grad_part == 0.0
    assert cutoff_value(pd, CutoffProfile(2.0), [0.1, 0.2, 0.3]) == 1.0


def test_overlapping_annuli_are_rejected():
    pd = PerforatedDomain.from_holes(
        BIG_BALL, 0.5, 4.0, [[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]], [1.0, 1.0]
    )
    with pytest.raises(GeometryError):
        cutoff_norms(pd, CutoffProfile(2.0))
    with pytest.raises(GeometryError):
        cutoff_value(pd, CutoffProfile(2.0), [5.0, 5.0, 5.0])


def test_values_bounded_and_gradient_within_ramp_bound(constant_params, unit_ball):
    eps = 0.2
    pd = build_perforated(unit_ball, sample_marked(constant_params, unit_ball.scaled(5.0)), eps, 4.0)
    profile = CutoffProfile(2.0)
    rng = np.random.default_rng(0)
    a = pd.radii[0]
    offsets = rng.normal(size=(2000, 3))
    offsets *= (rng.uniform(0.0, 3.0 * a, 2000) / np.linalg.norm(offsets, axis=1))[:, None]
    points = pd.centers[rng.integers(0, pd.hole_count, 2000)] + offsets
    g = cutoff_values(pd, profile, points)
    assert np.all((g >= 0.0) & (g <= 1.0))
    far = np.linalg.norm(offsets, axis=1) >= 2.0 * a
    assert np.all(g[far] == 1.0)
    grad = np.linalg.norm(cutoff_gradients(pd, profile, points), axis=1)
    assert np.all(grad <= RAMP_SLOPE_MAX / a * (1.0 + 1e-12))


def test_negative_sigma_warns(caplog):
    pd = _single_hole(1.0)
    with caplog.at_level(logging.WARNING, logger="tools.cutoff"):
        norms = cutoff_norms(pd, CutoffProfile(2.9))
    assert not norms.rate_defined
    assert "no decay rate" in caplog.text


@pytest.mark.slow
@pytest.mark.parametrize("trial", range(5))
def test_monte_carlo_agrees_with_closed_form(unit_ball, trial):
    params = ProcessParams(intensity=1.0, radius_law=ConstantRadius(value=1.0), seed=100)
    eps = 0.2
    pd = build_perforated(unit_ball, sample_marked(params, unit_ball.scaled(1.0 / eps), trial), eps, 4.0)
    profile = CutoffProfile(2.0)
    exact = cutoff_norms(pd, profile).grad_part ** 2
    estimate = monte_carlo_gradient_integral(pd, profile, 200_000, make_rng(trial, 99))
    assert estimate == pytest.approx(exact, rel=0.01)


def test_verify_cutoff_rate_needs_three_eps(constant_params, unit_ball):
    with pytest.raises(ParameterError):
        verify_cutoff_rate(constant_params, unit_ball, 4.0, 2.0, [0.2, 0.1], 1)


@pytest.mark.slow
@pytest.mark.parametrize(
    "alpha, sigma, tol", [(4.0, 0.5, 0.1), (5.0, 1.0, 0.15)]
)
def test_cutoff_rate_matches_sigma(unit_ball, alpha, sigma, tol):
    params = ProcessParams(intensity=1.0, radius_law=ConstantRadius(value=1.0), seed=0)
    fit, rows = verify_cutoff_rate(
        params, unit_ball, alpha, 2.0, [0.1, 0.07, 0.05, 0.035, 0.02], n_seeds=5, tol=tol, workers=4
    )
    assert fit.target_exponent == pytest.approx(sigma)
    assert all(r.target_sigma == pytest.approx(sigma) for r in rows)
    assert fit.passed, fit
