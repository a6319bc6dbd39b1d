"""Energy and power arithmetic on traces, plus consistency statistics.

Two power metrics are derived from a trace. The direct sample is the single
instantaneous value republished at each interface update. Power from energy
divides the accumulator delta by the sample-count delta between two updates,
giving the average power over the window; it is the preferred metric since
it reflects every internal sample rather than one per update.

Counters are treated as wrapping: accumulator deltas are taken modulo 2^64
and update_tag deltas modulo 2^32, so long-lived devices that roll over
still produce correct differences.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlignmentError,
    DegenerateInput,
    LengthMismatch,
    MismatchedSensor,
    TooFewSamples,
    ZeroSampleDelta,
    ZeroTruthValue,
)
from .occ_image import SensorRecord
from .reader import RawTrace, TraceEntry

_U32 = 1 << 32
_U64 = 1 << 64


class PowerKind(enum.Enum):
    DIRECT = "direct_sample"
    PFE = "power_from_energy"


@dataclass
class PowerPoint:
    time: float
    power: float
    kind: PowerKind


@dataclass
class PowerSeries:
    """Timestamped power values, possibly mixing both metric kinds."""

    points: list[PowerPoint] = field(default_factory=list)

    def times(self, kind: PowerKind | None = None) -> np.ndarray:
        return np.array([p.time for p in self.points
                         if kind is None or p.kind is kind], dtype=float)

    def values(self, kind: PowerKind | None = None) -> np.ndarray:
        return np.array([p.power for p in self.points
                         if kind is None or p.kind is kind], dtype=float)

    def of_kind(self, kind: PowerKind) -> "PowerSeries":
        return PowerSeries([p for p in self.points if p.kind is kind])


@dataclass
class ErrorStats:
    mape: float     # fraction, not percent
    mae: float      # watts
    n: int


@dataclass
class QuadraticFit:
    """Least-squares polynomial y = c0 + c1*x + c2*x**2."""

    c0: float
    c1: float
    c2: float
    residual_stats: ErrorStats

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.c0 + self.c1 * x + self.c2 * x * x


@dataclass
class ComponentSumResult:
    stats: ErrorStats
    times: np.ndarray       # matched update instants
    residuals: np.ndarray   # bulk minus component sum, per instant


def power_from_energy(r1: SensorRecord, r2: SensorRecord) -> float:
    """Average power between two records of the same sensor, in watts."""
    if r1.gsid != r2.gsid:
        raise MismatchedSensor(f"gsid {r1.gsid} vs {r2.gsid}")
    tag_delta = (r2.update_tag - r1.update_tag) % _U32
    if tag_delta == 0:
        raise ZeroSampleDelta("update_tag did not advance")
    acc_delta = (r2.accumulator - r1.accumulator) % _U64
    return acc_delta / tag_delta


def energy_from_accumulator(acc_delta: float, internal_rate: float) -> float:
    """Energy in joules represented by an accumulator delta.

    ``internal_rate`` is the rate at which samples enter the accumulator,
    in the same timebase the result should be expressed in.
    """
    if internal_rate <= 0:
        raise ValueError("internal_rate must be positive")
    return acc_delta / internal_rate


def dedupe_updates(trace: RawTrace) -> list[TraceEntry]:
    """Keep the first entry of every device update (record timestamp run)."""
    updates = []
    previous = None
    for entry in trace.entries:
        if previous is None or entry.record.timestamp != previous:
            updates.append(entry)
            previous = entry.record.timestamp
    return updates


def derive_pfe_series(trace: RawTrace) -> PowerSeries:
    """Direct-sample and power-from-energy series of a trace.

    The trace is first reduced to one entry per device update. Each update
    contributes a direct point; each consecutive update pair with a nonzero
    sample-count delta contributes a power-from-energy point stamped at the
    later update, summarizing the window that ends there.
    """
    updates = dedupe_updates(trace)
    if len(updates) < 2:
        raise TooFewSamples(f"trace holds {len(updates)} updates, need at least 2")
    points = [PowerPoint(e.host_time, float(e.record.sample), PowerKind.DIRECT)
              for e in updates]
    for earlier, later in zip(updates, updates[1:]):
        tag_delta = (later.record.update_tag - earlier.record.update_tag) % _U32
        if tag_delta == 0:
            continue
        points.append(PowerPoint(
            later.host_time,
            power_from_energy(earlier.record, later.record),
            PowerKind.PFE,
        ))
    return PowerSeries(points)


def error_stats(truth, estimate) -> ErrorStats:
    """MAPE (as a fraction) and MAE of ``estimate`` against ``truth``."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape or truth.size == 0:
        raise LengthMismatch(f"shapes {truth.shape} vs {estimate.shape}")
    if np.any(truth == 0):
        raise ZeroTruthValue("truth contains zero values; MAPE undefined")
    abs_err = np.abs(estimate - truth)
    return ErrorStats(
        mape=float(np.mean(abs_err / np.abs(truth))),
        mae=float(np.mean(abs_err)),
        n=int(truth.size),
    )


def quadratic_fit(x, y, degree: int = 2) -> QuadraticFit:
    """Least-squares polynomial fit of degree 2 (or 1 via ``degree``).

    Residual MAPE is computed over the points with nonzero y so that exact
    fits through zero-valued points still report cleanly; MAE always covers
    every point.
    """
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"shapes {x.shape} vs {y.shape}")
    if x.size < degree + 1 or np.unique(x).size < degree + 1:
        raise DegenerateInput(
            f"need at least {degree + 1} distinct x values, got {np.unique(x).size}"
        )
    coeffs = np.polynomial.polynomial.polyfit(x, y, degree)
    c0, c1 = float(coeffs[0]), float(coeffs[1])
    c2 = float(coeffs[2]) if degree == 2 else 0.0
    predicted = c0 + c1 * x + c2 * x * x
    abs_err = np.abs(predicted - y)
    nonzero = y != 0
    mape = float(np.mean(abs_err[nonzero] / np.abs(y[nonzero]))) if nonzero.any() else 0.0
    stats = ErrorStats(mape=mape, mae=float(np.mean(abs_err)), n=int(y.size))
    return QuadraticFit(c0=c0, c1=c1, c2=c2, residual_stats=stats)


def component_sum_check(bulk: PowerSeries, components: list[PowerSeries],
                        tolerance: float | None = None) -> ComponentSumResult:
    """Compare a bulk power series against the sum of component series.

    Series are aligned on the bulk series' instants: for every bulk point,
    the nearest point of each component within ``tolerance`` is used
    (default: half the bulk series' median update interval). Instants
    missing from any component are skipped. Pass single-kind series, e.g.
    ``series.of_kind(PowerKind.PFE)``.
    """
    if not components:
        raise ValueError("need at least one component series")
    bulk_times = bulk.times()
    bulk_values = bulk.values()
    if bulk_times.size == 0:
        raise AlignmentError("bulk series is empty")
    if tolerance is None:
        if bulk_times.size < 2:
            raise AlignmentError("cannot infer tolerance from a single-point series")
        tolerance = float(np.median(np.diff(bulk_times))) / 2

    comp_times = [c.times() for c in components]
    comp_values = [c.values() for c in components]
    matched_times = []
    matched_bulk = []
    matched_sum = []
    for t, v in zip(bulk_times, bulk_values):
        total = 0.0
        for times, values in zip(comp_times, comp_values):
            if times.size == 0:
                break
            i = int(np.searchsorted(times, t))
            best = None
            for j in (i - 1, i):
                if 0 <= j < times.size:
                    d = abs(times[j] - t)
                    if best is None or d < best[0]:
                        best = (d, j)
            if best is None or best[0] > tolerance:
                break
            total += values[best[1]]
        else:
            matched_times.append(t)
            matched_bulk.append(v)
            matched_sum.append(total)
    if not matched_times:
        raise AlignmentError("no overlapping update instants within tolerance")
    bulk_arr = np.array(matched_bulk)
    sum_arr = np.array(matched_sum)
    return ComponentSumResult(
        stats=error_stats(bulk_arr, sum_arr),
        times=np.array(matched_times),
        residuals=bulk_arr - sum_arr,
    )
