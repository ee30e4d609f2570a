import math

import pytest

from core.errors import ParameterError, ResourceError
from tools.models import ConstantRadius, ParetoRadius, ProcessParams, SllnRow, UniformRadius
from tools.slln import analytic_moment, error_trend, slln_sweep, within_band

BALL_VOLUME = 4.0 * math.pi / 3.0


def test_analytic_moments():
    assert analytic_moment(ConstantRadius(value=1.0), 3) == 1.0
    assert analytic_moment(ConstantRadius(value=2.0), 3) == 8.0
    assert analytic_moment(UniformRadius(low=0.0, high=1.0), 3) == pytest.approx(0.25)
    assert math.isinf(analytic_moment(ParetoRadius(shape=2.0, scale=1.0), 3))


def test_analytic_moment_needs_positive_order():
    with pytest.raises(ParameterError):
        analytic_moment(ConstantRadius(), 0)


def test_count_target_is_ball_volume(constant_params, unit_ball):
    rows = slln_sweep(constant_params, unit_ball, [0.5, 0.4], m=0, n_seeds=2)
    assert all(r.target_count == pytest.approx(BALL_VOLUME) for r in rows)
    assert [r.eps for r in rows] == [0.5, 0.4]


def test_worker_processes_reproduce_the_serial_sweep(constant_params, unit_ball):
    serial = slln_sweep(constant_params, unit_ball, [0.3, 0.2], m=3.0, n_seeds=4, workers=1)
    pooled = slln_sweep(constant_params, unit_ball, [0.3, 0.2], m=3.0, n_seeds=4, workers=3)
    assert [r.model_dump() for r in pooled] == [r.model_dump() for r in serial]


def test_counts_and_moments_within_four_standard_errors(unit_ball):
    params = ProcessParams(intensity=1.0, radius_law=ConstantRadius(value=1.0), seed=0)
    for m in (0.0, 3.0):
        rows = slln_sweep(params, unit_ball, [0.2, 0.1, 0.05], m=m, n_seeds=20, workers=4)
        for row in rows:
            assert within_band(row, 4.0), row


def test_scaled_moment_close_to_limit_at_small_eps(unit_ball):
    params = ProcessParams(intensity=1.0, radius_law=ConstantRadius(value=1.0), seed=11)
    (row,) = slln_sweep(params, unit_ball, [0.05], m=3, n_seeds=20)
    assert row.rel_err_moment < 0.03


def test_uniform_radii_moment_target(unit_ball):
    params = ProcessParams(intensity=1.0, radius_law=UniformRadius(low=0.0, high=1.0), seed=5)
    (row,) = slln_sweep(params, unit_ball, [0.1], m=3, n_seeds=10)
    assert row.target_moment == pytest.approx(BALL_VOLUME / 4.0)
    assert row.rel_err_moment < 0.05


def test_filtered_gap_shrinks_with_eps(constant_params, unit_ball):
    eps = [0.2, 0.05]
    full = slln_sweep(constant_params, unit_ball, eps, m=0, n_seeds=5)
    filtered = slln_sweep(constant_params, unit_ball, eps, m=0, n_seeds=5, filtered=True)
    gaps = [f.mean_scaled_count - g.mean_scaled_count for f, g in zip(full, filtered)]
    assert all(g > 0 for g in gaps)
    assert gaps[1] < gaps[0]


@pytest.mark.slow
def test_heavy_tailed_moment_does_not_stabilise(unit_ball):
    params = ProcessParams(intensity=1.0, radius_law=ParetoRadius(shape=1.5), seed=0)
    rows = slln_sweep(params, unit_ball, [0.2, 0.05], m=2, n_seeds=20)
    assert all(math.isinf(r.target_moment) and math.isinf(r.rel_err_moment) for r in rows)
    assert rows[1].mean_scaled_moment > 1.5 * rows[0].mean_scaled_moment


def test_sweep_parameter_errors(constant_params, unit_ball):
    with pytest.raises(ParameterError):
        slln_sweep(constant_params, unit_ball, [0.1, 0.2], m=0, n_seeds=1)
    with pytest.raises(ParameterError):
        slln_sweep(ProcessParams(intensity=0.0), unit_ball, [0.1], m=0, n_seeds=1)
    with pytest.raises(ParameterError):
        slln_sweep(constant_params, unit_ball, [0.1], m=0, n_seeds=0)


def test_expected_point_cap(constant_params, unit_ball):
    with pytest.raises(ResourceError):
        slln_sweep(constant_params, unit_ball, [0.01], m=0, n_seeds=1, max_expected_points=1e5)


def _row(eps, rel_err):
    return SllnRow(
        eps=eps, m=0, n_seeds=1,
        mean_scaled_count=1.0, se_count=0.1, target_count=1.0,
        mean_scaled_moment=1.0, se_moment=0.1, target_moment=1.0,
        rel_err_count=rel_err, rel_err_moment=rel_err,
    )


def test_error_trend_slope_is_positive_when_errors_shrink():
    rows = [_row(e, 0.5 * e**0.5) for e in (0.2, 0.1, 0.05, 0.025)]
    trend = error_trend(rows)
    assert trend.slope == pytest.approx(0.5)
