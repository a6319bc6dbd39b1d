"""Aliasing detection and internal-sampling-rate estimation.

When a square workload runs near the sampler's own rate, every internal
sample lands at nearly the same workload phase, so the averaged power values
stop evening out and instead alternate slowly between the two workload
levels. Three observables fall out of that:

* the spread of direct samples collapses onto the spread of the averaged
  power-from-energy values (normally it is much wider),
* the averaged values trace a slow beat whose frequency equals the distance
  between workload frequency and sampling rate,
* counting beat cycles for workloads at known frequencies pins down the
  sampling rate itself via ``|f_sampling - f_workload| = f_pattern``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InconsistentRate, NoPattern, TooFewSamples
from .power_analysis import PowerKind, PowerSeries


@dataclass
class AliasingReport:
    """Spread comparison of direct samples vs. power-from-energy values."""

    stddev_direct: float
    stddev_pfe: float
    spread_ratio: float
    aliasing_detected: bool
    f_pattern: float | None = None
    cycles_counted: int = 0
    observation_span: float = 0.0


@dataclass
class PatternEstimate:
    f_pattern: float
    cycles: int
    span: float


@dataclass
class RateEstimate:
    f_sampling: float
    per_pair: list[tuple[float, float, tuple[float, float]]]
    disagreement: float


def spread_stats(series: PowerSeries, ratio_threshold: float = 1.5) -> AliasingReport:
    """Compare per-kind sample spreads; a collapsed ratio flags aliasing.

    A series where both kinds are constant is indistinguishable from the
    aliased case and is flagged with a spread ratio of 1.
    """
    direct = series.values(PowerKind.DIRECT)
    pfe = series.values(PowerKind.PFE)
    if direct.size < 100 or pfe.size < 100:
        raise TooFewSamples(
            f"need >= 100 points per kind, got {direct.size} direct / {pfe.size} pfe"
        )
    std_direct = float(np.std(direct, ddof=1))
    std_pfe = float(np.std(pfe, ddof=1))
    if std_direct == 0.0 and std_pfe == 0.0:
        ratio = 1.0
    elif std_pfe == 0.0:
        ratio = float("inf")
    else:
        ratio = std_direct / std_pfe
    return AliasingReport(
        stddev_direct=std_direct,
        stddev_pfe=std_pfe,
        spread_ratio=ratio,
        aliasing_detected=ratio < ratio_threshold,
    )


def classify_levels(series: PowerSeries, low: float, high: float,
                    hysteresis_fraction: float = 0.10) -> tuple[np.ndarray, np.ndarray]:
    """Label points as +1 (high), -1 (low), or 0 (inside the hysteresis band).

    Returns (times, labels). Points of kind power_from_energy are used when
    present, otherwise all points.
    """
    picked = series.of_kind(PowerKind.PFE)
    if not picked.points:
        picked = series
    times = picked.times()
    values = picked.values()
    mid = (low + high) / 2
    band = hysteresis_fraction * (high - low)
    labels = np.zeros(values.size, dtype=int)
    labels[values > mid + band] = 1
    labels[values < mid - band] = -1
    return times, labels


def pattern_frequency(series: PowerSeries, low: float, high: float,
                      hysteresis_fraction: float = 0.10) -> PatternEstimate:
    """Frequency of the slow low/high alternation of a power series.

    Cycle boundaries are the low-to-high transitions of the hysteresis
    classification; each boundary pair delimits one complete cycle (one high
    phase followed by one low phase), so the frequency is the number of
    complete cycles divided by the span between the first and last boundary.
    """
    if not low < high:
        raise ValueError("need low < high")
    times, labels = classify_levels(series, low, high, hysteresis_fraction)
    rising = []
    state = 0
    for t, label in zip(times, labels):
        if label == 0:
            continue
        if label == 1 and state == -1:
            rising.append(t)
        state = label
    if len(rising) < 2:
        raise NoPattern(
            f"found {max(len(rising) - 1, 0)} complete cycles, need at least 1"
        )
    span = float(rising[-1] - rising[0])
    cycles = len(rising) - 1
    return PatternEstimate(f_pattern=cycles / span, cycles=cycles, span=span)


def estimate_internal_rate(pairs: list[tuple[float, float]],
                           nominal: float = 2000.0,
                           max_disagreement: float = 1.0) -> RateEstimate:
    """Solve ``|f_sampling - f_workload| = f_pattern`` over measured pairs.

    Each pair admits two candidates, ``f_workload + f_pattern`` and
    ``f_workload - f_pattern``; the sign ambiguity is resolved by picking
    the combination whose candidates cluster tightest (for a single pair,
    the candidate nearer the nominal rate). The estimate is the midpoint of
    the winning cluster and ``disagreement`` its half-width.
    """
    if not pairs:
        raise ValueError("need at least one (f_workload, f_pattern) pair")
    per_pair = [(fw, fp, (fw + fp, fw - fp)) for fw, fp in pairs]
    if len(pairs) == 1:
        candidates = per_pair[0][2]
        f_sampling = min(candidates, key=lambda c: abs(c - nominal))
        return RateEstimate(f_sampling=f_sampling, per_pair=per_pair, disagreement=0.0)
    best = None
    for combo in product(*[p[2] for p in per_pair]):
        lo, hi = min(combo), max(combo)
        spread = hi - lo
        centre = (lo + hi) / 2
        key = (spread, abs(centre - nominal))
        if best is None or key < best[0]:
            best = (key, centre, spread / 2)
    _, f_sampling, disagreement = best
    if disagreement > max_disagreement:
        raise InconsistentRate(
            f"best candidate cluster disagrees by {disagreement:.3f} Hz"
        )
    return RateEstimate(f_sampling=f_sampling, per_pair=per_pair,
                        disagreement=disagreement)


def worst_case_error(p_low: float, p_high: float) -> float:
    """Relative error of sampling only one level of an even square workload.

    With both halves weighted equally the true average sits at the midpoint,
    so locking onto either level misses it by half the swing.
    """
    if p_low + p_high <= 0:
        raise ValueError("need p_low + p_high > 0")
    mid = (p_low + p_high) / 2
    return (p_high - mid) / mid
