"""Spread comparison, beat-pattern counting, and rate estimation."""

import random

import pytest

from occtool.aliasing import (
    estimate_internal_rate,
    pattern_frequency,
    spread_stats,
    worst_case_error,
)
from occtool.errors import InconsistentRate, NoPattern, TooFewSamples
from occtool.power_analysis import PowerKind, PowerPoint, PowerSeries


def mixed_series(direct_values, pfe_values, interval=0.04):
    points = [PowerPoint(i * interval, v, PowerKind.DIRECT)
              for i, v in enumerate(direct_values)]
    points += [PowerPoint(i * interval, v, PowerKind.PFE)
               for i, v in enumerate(pfe_values)]
    return PowerSeries(points)


def square_pfe_series(f_pattern, duration=30.0, interval=0.04,
                      low=225.0, high=285.0):
    points = []
    t = interval
    while t <= duration:
        level = high if (t * f_pattern) % 1.0 < 0.5 else low
        points.append(PowerPoint(t, level, PowerKind.PFE))
        t += interval
    return PowerSeries(points)


# ---------------------------------------------------------------- spread

def test_spread_wide_direct_narrow_pfe_is_not_aliasing():
    direct = [225.0, 285.0] * 100
    pfe = [254.0, 255.0, 256.0] * 67
    report = spread_stats(mixed_series(direct, pfe))
    assert report.spread_ratio > 1.5
    assert not report.aliasing_detected


def test_spread_matching_spreads_flag_aliasing():
    wave = [225.0] * 60 + [285.0] * 60
    report = spread_stats(mixed_series(wave * 2, wave * 2))
    assert report.spread_ratio == pytest.approx(1.0, abs=0.05)
    assert report.aliasing_detected


def test_spread_degenerate_constant_series_flags_aliasing():
    report = spread_stats(mixed_series([255.0] * 150, [255.0] * 150))
    assert report.spread_ratio == 1.0
    assert report.aliasing_detected


def test_spread_requires_enough_points():
    with pytest.raises(TooFewSamples):
        spread_stats(mixed_series([1.0] * 99, [1.0] * 200))


# ---------------------------------------------------------------- pattern

def test_pattern_frequency_recovers_synthetic_beat():
    series = square_pfe_series(0.5)
    estimate = pattern_frequency(series, 225.0, 285.0)
    span = estimate.span
    assert abs(estimate.f_pattern - 0.5) <= 1.0 / span
    assert estimate.f_pattern == pytest.approx(estimate.cycles / span)


def test_pattern_frequency_slow_beat():
    series = square_pfe_series(0.24, duration=20.0)
    estimate = pattern_frequency(series, 225.0, 285.0)
    assert abs(estimate.f_pattern - 0.24) <= 1.0 / estimate.span


def test_pattern_frequency_ignores_hysteresis_band_points():
    # ramp through the midpoint between levels; band points carry no state
    points = []
    t = 0.0
    for cycle in range(6):
        for v in (225.0, 240.0, 255.0, 270.0, 285.0, 270.0, 255.0, 240.0):
            points.append(PowerPoint(t, v, PowerKind.PFE))
            t += 0.25
    estimate = pattern_frequency(PowerSeries(points), 225.0, 285.0)
    assert estimate.cycles == 5
    assert estimate.f_pattern == pytest.approx(0.5, rel=0.01)


def test_pattern_frequency_constant_series_has_no_pattern():
    series = PowerSeries([PowerPoint(i * 0.04, 255.0, PowerKind.PFE)
                          for i in range(500)])
    with pytest.raises(NoPattern):
        pattern_frequency(series, 225.0, 285.0)


def test_pattern_frequency_validates_levels():
    with pytest.raises(ValueError):
        pattern_frequency(square_pfe_series(0.5), 285.0, 225.0)


# ---------------------------------------------------------------- rate estimate

TRIO = [(1995.0, 1.24), (1996.0, 0.24), (1997.0, 0.77)]


def test_estimate_internal_rate_from_three_pairs():
    estimate = estimate_internal_rate(TRIO, nominal=2000.0)
    assert estimate.f_sampling == pytest.approx(1996.24, abs=0.01)
    assert estimate.disagreement <= 0.01
    assert len(estimate.per_pair) == 3


def test_estimate_internal_rate_single_pair_resolves_toward_nominal():
    estimate = estimate_internal_rate([(1996.0, 0.24)], nominal=2000.0)
    assert estimate.f_sampling == pytest.approx(1996.24)
    assert estimate.disagreement == 0.0


def test_estimate_internal_rate_zero_beat():
    estimate = estimate_internal_rate([(1000.0, 0.0)], nominal=2000.0)
    assert estimate.f_sampling == 1000.0


def test_estimate_internal_rate_is_order_invariant():
    rng = random.Random(31)
    reference = estimate_internal_rate(TRIO, nominal=2000.0)
    for _ in range(10):
        shuffled = TRIO[:]
        rng.shuffle(shuffled)
        estimate = estimate_internal_rate(shuffled, nominal=2000.0)
        assert estimate.f_sampling == pytest.approx(reference.f_sampling, abs=1e-12)


def test_estimate_internal_rate_inconsistent_pairs():
    with pytest.raises(InconsistentRate):
        estimate_internal_rate([(1000.0, 0.0), (1500.0, 0.0)], nominal=2000.0)


def test_estimate_internal_rate_needs_pairs():
    with pytest.raises(ValueError):
        estimate_internal_rate([])


# ---------------------------------------------------------------- worst case

def test_worst_case_error_reference_levels():
    assert worst_case_error(225.0, 285.0) == pytest.approx(0.1176, abs=1e-4)


def test_worst_case_error_degenerate_cases():
    assert worst_case_error(100.0, 100.0) == 0.0
    assert worst_case_error(0.0, 500.0) == 1.0


def test_worst_case_error_is_scale_invariant():
    rng = random.Random(32)
    for _ in range(50):
        low = rng.uniform(0, 300)
        high = low + rng.uniform(0, 300)
        if low + high == 0:
            continue
        k = rng.uniform(0.01, 50)
        assert worst_case_error(k * low, k * high) == pytest.approx(
            worst_case_error(low, high), rel=1e-12)


def test_worst_case_error_rejects_zero_levels():
    with pytest.raises(ValueError):
        worst_case_error(0.0, 0.0)
