"""Deterministic emulation of the in-band power measurement pipeline.

The simulated device runs on its own clock, related to host time by a
constant skew (device seconds per host second). It samples each sensor's
analytic workload signal on a fixed device-time grid, rounds to whole watts,
and folds the samples into per-sensor accumulators. Every flush period the
inactive reading buffer is rewritten with the live accumulator state; only
every Nth flush also refreshes the published sample and timestamp fields,
which is what makes the externally visible value change rate much lower
than the internal sampling rate.

Workload signals are functions of host time: the workload runs on the host,
while the sampling grid lives on the (slightly slower) device clock. A
square workload whose frequency sits near the effective host-time sampling
rate therefore hits almost the same phase on every sample, which is exactly
the aliasing regime the analyses in :mod:`occtool.aliasing` quantify.

Buffer rewrites take a small nonzero device-time span during which the
target buffer's valid flag is cleared, so snapshots can observe the
single-valid-buffer state without ever observing zero valid buffers.

State bookkeeping is exact: ``update_tag`` equals
``floor(device_time * nominal_internal_rate)`` at all times and the
accumulator is an exact integer sum of the quantized samples.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import OutOfBounds, TimeReversal
from .occ_image import (
    BLOCK_SIZE,
    BUFFER_HEADER_SIZE,
    KIND_POWER,
    LOCATION_GPU,
    LOCATION_MEMORY,
    LOCATION_PROCESSOR,
    LOCATION_SYSTEM,
    PING_OFFSET,
    PONG_OFFSET,
    RECORD,
    ReadingBuffer,
    SensorDataBlock,
    SensorImage,
    SensorNameEntry,
    SensorRecord,
    encode_image,
)
from .reader import RawTrace, ReadMode, sample_loop

_U32 = 1 << 32
_U64 = 1 << 64

# Sensor whose signal receives the unaccounted bulk offset.
BULK_SENSOR_NAME = "PWRSYS"


class SignalKind(enum.Enum):
    CONSTANT = "constant"
    SQUARE = "square"


@dataclass(frozen=True)
class WorkloadSignal:
    """Piecewise power signal driving one simulated sensor.

    Square signals are high for the first ``duty`` fraction of each period
    and low for the rest; ``phase`` shifts the cycle start. Transitions are
    treated as instantaneous.
    """

    kind: SignalKind
    p_constant: float = 0.0
    f_workload: float = 0.0
    duty: float = 0.5
    p_low: float = 0.0
    p_high: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind is SignalKind.CONSTANT:
            if self.p_constant < 0:
                raise ValueError("constant power must be non-negative")
        else:
            if self.f_workload <= 0:
                raise ValueError("square signal needs f_workload > 0")
            if not 0 < self.duty < 1:
                raise ValueError("duty must lie in (0, 1)")
            if not 0 <= self.p_low <= self.p_high:
                raise ValueError("need 0 <= p_low <= p_high")
            if not 0 <= self.phase < 1:
                raise ValueError("phase must lie in [0, 1)")

    @classmethod
    def constant(cls, power: float) -> "WorkloadSignal":
        return cls(kind=SignalKind.CONSTANT, p_constant=power)

    @classmethod
    def square(cls, f_workload: float, p_low: float, p_high: float,
               duty: float = 0.5, phase: float = 0.0) -> "WorkloadSignal":
        return cls(kind=SignalKind.SQUARE, f_workload=f_workload,
                   duty=duty, p_low=p_low, p_high=p_high, phase=phase)


def signal_power(signal: WorkloadSignal, t: float) -> float:
    """Evaluate the signal at time ``t`` (seconds on the signal's clock)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if signal.kind is SignalKind.CONSTANT:
        return signal.p_constant
    frac = (t * signal.f_workload + signal.phase) % 1.0
    return signal.p_high if frac < signal.duty else signal.p_low


def _high_phase_time(u: float, duty: float) -> float:
    # Accumulated high duration, in periods, of the unit square over [0, u).
    whole = math.floor(u)
    return whole * duty + min(u - whole, duty)


def ground_truth_energy(signal: WorkloadSignal, t1: float, t2: float) -> float:
    """Exact integral of signal_power over [t1, t2], in joules."""
    if t2 < t1:
        raise ValueError("t2 must not precede t1")
    if signal.kind is SignalKind.CONSTANT:
        return signal.p_constant * (t2 - t1)
    f = signal.f_workload
    high = (_high_phase_time(t2 * f + signal.phase, signal.duty)
            - _high_phase_time(t1 * f + signal.phase, signal.duty)) / f
    return signal.p_low * (t2 - t1) + (signal.p_high - signal.p_low) * high


_LOCATION_NAMES = {
    "system": LOCATION_SYSTEM,
    "processor": LOCATION_PROCESSOR,
    "memory": LOCATION_MEMORY,
    "gpu": LOCATION_GPU,
}


@dataclass
class SimSensor:
    """One simulated sensor: its directory entry, signal, and block index."""

    entry: SensorNameEntry
    signal: WorkloadSignal
    block: int = 0


@dataclass
class SimConfig:
    """Parameters of the simulated device.

    ``clock_skew`` is device seconds per host second; the effective
    host-time sampling rate is ``nominal_internal_rate * clock_skew``.
    The defaults give 1996.16 Sa/s internally and external value changes
    every ~40.08 ms of host time (every 5th of the 8 ms device flushes).
    """

    nominal_internal_rate: float = 2000.0
    clock_skew: float = 0.99808
    flush_period_device: float = 0.008
    publish_every_n_flushes: int = 5
    timebase_hz: int = 512_000_000
    quantization_w: int = 1
    unaccounted_bulk: float = 0.0
    rewrite_duration_device: float = 0.001
    sensors: list[SimSensor] = field(default_factory=list)

    def __post_init__(self):
        if self.nominal_internal_rate <= 0:
            raise ValueError("nominal_internal_rate must be positive")
        if self.clock_skew <= 0:
            raise ValueError("clock_skew must be positive")
        if self.flush_period_device <= 0:
            raise ValueError("flush_period_device must be positive")
        if self.publish_every_n_flushes < 1:
            raise ValueError("publish_every_n_flushes must be >= 1")
        if self.timebase_hz <= 0:
            raise ValueError("timebase_hz must be positive")
        if not isinstance(self.quantization_w, int) or self.quantization_w < 1:
            raise ValueError("quantization_w must be an integer >= 1")
        if not 0 < self.rewrite_duration_device < self.flush_period_device:
            raise ValueError("rewrite duration must lie inside the flush period")

    @property
    def effective_rate(self) -> float:
        """Internal samples per host second."""
        return self.nominal_internal_rate * self.clock_skew


@dataclass(frozen=True)
class SensorStateView:
    """Read-only view of one sensor's live simulator state."""

    accumulator: int
    update_tag: int
    last_sample: int
    published_sample: int
    published_timestamp: int


class _SensorRuntime:
    __slots__ = ("gsid", "signal", "is_bulk", "block", "slot",
                 "accumulator", "update_tag", "last_sample",
                 "published_sample", "published_timestamp")

    def __init__(self, gsid, signal, is_bulk, block, slot):
        self.gsid = gsid
        self.signal = signal
        self.is_bulk = is_bulk
        self.block = block
        self.slot = slot
        self.accumulator = 0
        self.update_tag = 0
        self.last_sample = 0
        self.published_sample = 0
        self.published_timestamp = 0


class OccSimulator:
    """Single-owner state machine; advance and snapshot must be serialized."""

    def __init__(self, config: SimConfig):
        if not config.sensors:
            raise ValueError("config needs at least one sensor")
        self.config = config
        block_count = max(s.block for s in config.sensors) + 1
        if sorted({s.block for s in config.sensors}) != list(range(block_count)):
            raise ValueError("sensor block indices must be contiguous from 0")

        self._skew = config.clock_skew
        self._rate = config.nominal_internal_rate
        self._flush_period = config.flush_period_device
        self._flush_ticks = round(config.flush_period_device * config.timebase_hz)
        self._quant = config.quantization_w

        self._sensors: list[_SensorRuntime] = []
        per_block: list[list[_SensorRuntime]] = [[] for _ in range(block_count)]
        for sensor in config.sensors:
            runtime = _SensorRuntime(
                gsid=sensor.entry.gsid,
                signal=sensor.signal,
                is_bulk=sensor.entry.name == BULK_SENSOR_NAME,
                block=sensor.block,
                slot=len(per_block[sensor.block]),
            )
            self._sensors.append(runtime)
            per_block[sensor.block].append(runtime)
        self._per_block = per_block

        self._host_time = 0.0
        self._ticks = 0
        self._flushes = 0
        # Pending rewrite: (completion device time, target buffer, staged
        # record bytes per block). None when no rewrite is in flight.
        self._pending: tuple[float, str, list[bytes]] | None = None

        for runtime in self._sensors:
            runtime.last_sample = self._quantize(self._power_at(runtime, 0.0))
            runtime.published_sample = runtime.last_sample

        self._wire = bytearray(encode_image(self._initial_image(config, block_count)))
        self._ping_flag: list[int] = []
        self._pong_flag: list[int] = []
        self._ping_records: list[int] = []
        self._pong_records: list[int] = []
        for b in range(block_count):
            base = b * BLOCK_SIZE
            self._ping_flag.append(base + PING_OFFSET)
            self._pong_flag.append(base + PONG_OFFSET)
            self._ping_records.append(base + PING_OFFSET + BUFFER_HEADER_SIZE)
            self._pong_records.append(base + PONG_OFFSET + BUFFER_HEADER_SIZE)

    # ------------------------------------------------------------- helpers

    def _power_at(self, runtime: _SensorRuntime, host_time: float) -> float:
        p = signal_power(runtime.signal, host_time)
        if runtime.is_bulk:
            p += self.config.unaccounted_bulk
        return p

    def _quantize(self, power: float) -> int:
        # Round half up to the quantization grid.
        return math.floor(power / self._quant + 0.5) * self._quant

    def _record_for(self, runtime: _SensorRuntime) -> SensorRecord:
        return SensorRecord(
            gsid=runtime.gsid,
            timestamp=runtime.published_timestamp,
            sample=runtime.published_sample,
            accumulator=runtime.accumulator % _U64,
            update_tag=runtime.update_tag % _U32,
        )

    def _initial_image(self, config: SimConfig, block_count: int) -> SensorImage:
        blocks = []
        entries_per_block: list[list[SensorNameEntry]] = [[] for _ in range(block_count)]
        for sensor in config.sensors:
            entries_per_block[sensor.block].append(sensor.entry)
        for b in range(block_count):
            records = [self._record_for(r) for r in self._per_block[b]]
            blocks.append(SensorDataBlock(
                names=entries_per_block[b],
                ping=ReadingBuffer(valid=True, records=records),
                pong=ReadingBuffer(valid=False, records=list(records)),
            ))
        return SensorImage(blocks=blocks)

    # ---------------------------------------------------------------- state

    @property
    def host_time(self) -> float:
        return self._host_time

    @property
    def device_time(self) -> float:
        return self._skew * self._host_time

    def sensor_state(self, name: str) -> SensorStateView:
        for sensor, runtime in zip(self.config.sensors, self._sensors):
            if sensor.entry.name == name:
                return SensorStateView(
                    accumulator=runtime.accumulator,
                    update_tag=runtime.update_tag,
                    last_sample=runtime.last_sample,
                    published_sample=runtime.published_sample,
                    published_timestamp=runtime.published_timestamp,
                )
        raise KeyError(name)

    # ---------------------------------------------------------------- events

    def _do_tick(self, k: int) -> None:
        host = (k / self._rate) / self._skew
        for runtime in self._sensors:
            sample = self._quantize(self._power_at(runtime, host))
            runtime.accumulator += sample
            runtime.update_tag += 1
            runtime.last_sample = sample

    def _begin_flush(self, m: int) -> None:
        if m % self.config.publish_every_n_flushes == 0:
            timestamp = m * self._flush_ticks
            for runtime in self._sensors:
                runtime.published_sample = runtime.last_sample
                runtime.published_timestamp = timestamp
        staged = []
        for block_sensors in self._per_block:
            staged.append(b"".join(
                RECORD.pack(r.gsid, r.published_timestamp, r.published_sample,
                            r.accumulator % _U64, r.update_tag % _U32)
                for r in block_sensors
            ))
        target = "pong" if m % 2 == 1 else "ping"
        flags = self._pong_flag if target == "pong" else self._ping_flag
        for offset in flags:
            self._wire[offset] = 0
        completion = m * self._flush_period + self.config.rewrite_duration_device
        self._pending = (completion, target, staged)

    def _complete_rewrite(self) -> None:
        assert self._pending is not None
        _, target, staged = self._pending
        flags = self._pong_flag if target == "pong" else self._ping_flag
        records = self._pong_records if target == "pong" else self._ping_records
        for b, blob in enumerate(staged):
            self._wire[records[b]:records[b] + len(blob)] = blob
            self._wire[flags[b]] = 1
        self._pending = None

    def advance(self, to_host_time: float) -> None:
        """Advance the simulation to an absolute host time."""
        if to_host_time < self._host_time:
            raise TimeReversal(
                f"cannot advance from {self._host_time} back to {to_host_time}"
            )
        device_end = self._skew * to_host_time
        tick_end = math.floor(device_end * self._rate)
        flush_end = math.floor(device_end / self._flush_period)
        while True:
            t_tick = (self._ticks + 1) / self._rate if self._ticks < tick_end else math.inf
            t_flush = ((self._flushes + 1) * self._flush_period
                       if self._flushes < flush_end else math.inf)
            t_done = math.inf
            if self._pending is not None and self._pending[0] <= device_end:
                t_done = self._pending[0]
            if t_tick == math.inf and t_flush == math.inf and t_done == math.inf:
                break
            # Coinciding events resolve as tick, then rewrite completion,
            # then next flush: a flush captures the sample landing on its
            # own instant.
            if t_tick <= t_done and t_tick <= t_flush:
                self._ticks += 1
                self._do_tick(self._ticks)
            elif t_done <= t_flush:
                self._complete_rewrite()
            else:
                self._flushes += 1
                self._begin_flush(self._flushes)
        self._host_time = to_host_time

    def snapshot_image(self) -> bytes:
        """Immutable copy of the current committed wire image."""
        return bytes(self._wire)


class SimulatorSource:
    """Adapts a simulator to the reader's source protocol.

    Each readout advances the simulated host clock by ``readout_period``;
    the reads themselves are instantaneous. ``bytes_read`` counts every
    byte served, which lets tests compare the footprint of the naive and
    optimized read paths.
    """

    def __init__(self, sim: OccSimulator, readout_period: float):
        if readout_period <= 0:
            raise ValueError("readout_period must be positive")
        self._sim = sim
        self._period = readout_period
        self._readouts = 0
        self.bytes_read = 0

    def begin_readout(self) -> float:
        self._readouts += 1
        self._sim.advance(self._sim.host_time + self._period)
        return self._sim.host_time

    def read_all(self) -> bytes:
        data = self._sim.snapshot_image()
        self.bytes_read += len(data)
        return data

    def read_at(self, offset: int, size: int) -> bytes:
        wire = self._sim._wire
        if offset + size > len(wire):
            raise OutOfBounds(f"read of {size} bytes at {offset} past image end")
        self.bytes_read += size
        return bytes(wire[offset:offset + size])


def run_experiment(config: SimConfig, duration: float, readout_period: float,
                   sensor: str) -> RawTrace:
    """Drive a fresh simulator and read one sensor at a fixed host period."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    if readout_period <= 0:
        raise ValueError("readout_period must be positive")
    sim = OccSimulator(config)
    source = SimulatorSource(sim, readout_period)
    n = int(duration / readout_period)
    return sample_loop(source, sensor, n, ReadMode.OPTIMIZED)


def record_frames(config: SimConfig, duration: float, readout_period: float,
                  path: str | Path) -> int:
    """Write one snapshot frame per readout period; returns the frame count.

    The stream is a plain concatenation of image frames and can be replayed
    through :class:`occtool.reader.ReplaySource`.
    """
    if duration <= 0 or readout_period <= 0:
        raise ValueError("duration and readout_period must be positive")
    sim = OccSimulator(config)
    n = int(duration / readout_period)
    with open(path, "wb") as handle:
        for i in range(1, n + 1):
            sim.advance(i * readout_period)
            handle.write(sim.snapshot_image())
    return n


# ------------------------------------------------------------- sensor sets

_STANDARD_SET = (
    # name, location, sampling rate (mSa/s), default constant level (W)
    ("PWRSYS", LOCATION_SYSTEM, 2_000_000, 600.0),
    ("PWRPROC", LOCATION_PROCESSOR, 2_000_000, 250.0),
    ("PWRVDD", LOCATION_PROCESSOR, 1_000_000, 120.0),
    ("PWRVDN", LOCATION_PROCESSOR, 1_000_000, 60.0),
    ("PWRMEM", LOCATION_MEMORY, 2_000_000, 80.0),
    ("PWRGPU", LOCATION_GPU, 2_000_000, 900.0),
)


def standard_sensors(processors: int = 1,
                     signals: dict[str, WorkloadSignal] | None = None) -> list[SimSensor]:
    """Build the six standard power domains for ``processors`` blocks.

    Block 0 carries the system-level ``PWRSYS`` sensor plus the first
    processor's sensors; further blocks repeat the per-processor set with
    distinct gsids. ``signals`` overrides the default constant levels by
    sensor name (applied to every block the name appears in).
    """
    if processors < 1:
        raise ValueError("need at least one processor block")
    signals = signals or {}
    sensors = []
    for block in range(processors):
        for index, (name, location, rate, level) in enumerate(_STANDARD_SET):
            if location == LOCATION_SYSTEM and block > 0:
                continue
            entry = SensorNameEntry(
                gsid=block * 16 + index + 1,
                name=name,
                units="W",
                kind=KIND_POWER,
                location=location,
                freq_mhz_thousandths=rate,
            )
            signal = signals.get(name, WorkloadSignal.constant(level))
            sensors.append(SimSensor(entry=entry, signal=signal, block=block))
    return sensors


def standard_config(processors: int = 1,
                    signals: dict[str, WorkloadSignal] | None = None,
                    **overrides) -> SimConfig:
    """SimConfig with the standard sensor set and default timing."""
    return SimConfig(sensors=standard_sensors(processors, signals), **overrides)


# ------------------------------------------------------------- JSON config

def _signal_to_dict(signal: WorkloadSignal) -> dict:
    if signal.kind is SignalKind.CONSTANT:
        return {"kind": "constant", "p_constant_w": signal.p_constant}
    return {
        "kind": "square",
        "f_workload_hz": signal.f_workload,
        "duty": signal.duty,
        "p_low_w": signal.p_low,
        "p_high_w": signal.p_high,
        "phase": signal.phase,
    }


def _signal_from_dict(data: dict) -> WorkloadSignal:
    kind = data.get("kind")
    if kind == "constant":
        return WorkloadSignal.constant(float(data["p_constant_w"]))
    if kind == "square":
        return WorkloadSignal.square(
            f_workload=float(data["f_workload_hz"]),
            p_low=float(data["p_low_w"]),
            p_high=float(data["p_high_w"]),
            duty=float(data.get("duty", 0.5)),
            phase=float(data.get("phase", 0.0)),
        )
    raise ValueError(f"unknown signal kind {kind!r}")


def _location_from(value) -> int:
    if isinstance(value, str):
        try:
            return _LOCATION_NAMES[value]
        except KeyError:
            raise ValueError(f"unknown location {value!r}") from None
    return int(value)


def config_to_dict(config: SimConfig) -> dict:
    names = {v: k for k, v in _LOCATION_NAMES.items()}
    return {
        "nominal_internal_rate_sa_s": config.nominal_internal_rate,
        "clock_skew": config.clock_skew,
        "flush_period_device_s": config.flush_period_device,
        "publish_every_n_flushes": config.publish_every_n_flushes,
        "timebase_hz": config.timebase_hz,
        "quantization_w": config.quantization_w,
        "unaccounted_bulk_w": config.unaccounted_bulk,
        "rewrite_duration_device_s": config.rewrite_duration_device,
        "sensors": [
            {
                "name": s.entry.name,
                "gsid": s.entry.gsid,
                "units": s.entry.units,
                "kind": "power" if s.entry.kind == KIND_POWER else s.entry.kind,
                "location": names.get(s.entry.location, s.entry.location),
                "sample_rate_msa_s": s.entry.freq_mhz_thousandths,
                "block": s.block,
                "signal": _signal_to_dict(s.signal),
            }
            for s in config.sensors
        ],
    }


def config_from_dict(data: dict) -> SimConfig:
    sensors = []
    for raw in data.get("sensors", []):
        kind = raw.get("kind", "power")
        entry = SensorNameEntry(
            gsid=int(raw["gsid"]),
            name=str(raw["name"]),
            units=str(raw.get("units", "W")),
            kind=KIND_POWER if kind == "power" else int(kind),
            location=_location_from(raw.get("location", "system")),
            freq_mhz_thousandths=int(raw.get("sample_rate_msa_s", 2_000_000)),
        )
        sensors.append(SimSensor(
            entry=entry,
            signal=_signal_from_dict(raw["signal"]),
            block=int(raw.get("block", 0)),
        ))
    return SimConfig(
        nominal_internal_rate=float(data.get("nominal_internal_rate_sa_s", 2000.0)),
        clock_skew=float(data.get("clock_skew", 0.99808)),
        flush_period_device=float(data.get("flush_period_device_s", 0.008)),
        publish_every_n_flushes=int(data.get("publish_every_n_flushes", 5)),
        timebase_hz=int(data.get("timebase_hz", 512_000_000)),
        quantization_w=int(data.get("quantization_w", 1)),
        unaccounted_bulk=float(data.get("unaccounted_bulk_w", 0.0)),
        rewrite_duration_device=float(data.get("rewrite_duration_device_s", 0.001)),
        sensors=sensors,
    )


def load_config(path: str | Path) -> SimConfig:
    """Read a simulator configuration from a JSON file."""
    with open(path) as handle:
        return config_from_dict(json.load(handle))
