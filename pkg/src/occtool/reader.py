"""High-rate readout loop over sensor-image sources plus interface benchmarks.

A source hands out image bytes and a monotonic host timestamp per readout.
The loop buffers entries in preallocated memory and never sleeps or writes
to disk while running; persistence happens afterwards via save_trace.

Two read paths are provided. The naive path re-reads and re-parses the whole
image on every readout, including the sensor address lookup. The optimized
path resolves the sensor address once and then touches only the two buffer
valid flags and the addressed records, assuming the layout stays constant
between snapshots.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import (
    NoChanges,
    NoValidBuffer,
    OutOfBounds,
    SourceUnavailable,
    TooFewSamples,
)
from .occ_image import (
    BLOCK_SIZE,
    RECORD,
    RECORD_SIZE,
    BufferChoice,
    SensorLocator,
    SensorRecord,
    locate_sensor,
    parse_image,
    select_buffer,
)

TRACE_CSV_HEADER = "host_time_s,gsid,occ_timestamp_ticks,sample_w,accumulator,update_tag"

# Default live export path of the in-band sensor region.
DEFAULT_IMAGE_PATH = "/sys/firmware/opal/exports/occ_inband_sensors"


class ReadMode(enum.Enum):
    NAIVE = "naive"
    OPTIMIZED = "optimized"


class ImageSource(Protocol):
    """Provider of image bytes for the readout loop.

    ``begin_readout`` marks the start of one readout and returns its host
    time; host times must strictly increase between readouts. ``read_all``
    and ``read_at`` serve the snapshot current at the last readout without
    advancing time.
    """

    def begin_readout(self) -> float: ...

    def read_all(self) -> bytes: ...

    def read_at(self, offset: int, size: int) -> bytes: ...


@dataclass
class TraceEntry:
    host_time: float
    record: SensorRecord


@dataclass
class RawTrace:
    """Time-ordered host-timestamped readouts of one sensor."""

    sensor: str
    mode: ReadMode
    entries: list[TraceEntry] = field(default_factory=list)
    failed_reads: int = 0

    def host_times(self) -> np.ndarray:
        return np.array([e.host_time for e in self.entries], dtype=float)


@dataclass
class LatencyHistogram:
    """Histogram of spacings between successive readouts."""

    bin_width: float
    bins: dict[int, int]
    mean: float
    count: int


@dataclass
class UpdateRateEstimate:
    rate_sa_s: float
    mean_interval_s: float
    changes: int
    kept_gaps: int
    dropped_gaps: int


class FileSource:
    """Live or recorded single image file, one snapshot re-read per readout."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        try:
            self._handle = open(self._path, "rb")
        except OSError as exc:
            raise SourceUnavailable(f"cannot open {self._path}: {exc}") from exc
        self._last_time = 0.0
        self.bytes_read = 0

    def begin_readout(self) -> float:
        t = time.perf_counter()
        if t <= self._last_time:
            t = self._last_time + 1e-9
        self._last_time = t
        return t

    def read_all(self) -> bytes:
        try:
            self._handle.seek(0)
            data = self._handle.read()
        except OSError as exc:
            raise SourceUnavailable(f"read failed on {self._path}: {exc}") from exc
        self.bytes_read += len(data)
        return data

    def read_at(self, offset: int, size: int) -> bytes:
        try:
            self._handle.seek(offset)
            data = self._handle.read(size)
        except OSError as exc:
            raise SourceUnavailable(f"read failed on {self._path}: {exc}") from exc
        if len(data) < size:
            raise OutOfBounds(f"read of {size} bytes at {offset} past end of file")
        self.bytes_read += size
        return data

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> "FileSource":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class ReplaySource:
    """Replays a stream of concatenated image frames recorded earlier.

    Frames carry no host clock, so readout times are synthesized as
    ``frame_index * period``. The source is exhausted after the last frame.
    """

    def __init__(self, path: str | Path, blocks_per_frame: int = 1, period: float = 0.001):
        if blocks_per_frame < 1 or period <= 0:
            raise ValueError("blocks_per_frame must be >= 1 and period > 0")
        try:
            self._data = Path(path).read_bytes()
        except OSError as exc:
            raise SourceUnavailable(f"cannot read {path}: {exc}") from exc
        self._frame_size = blocks_per_frame * BLOCK_SIZE
        if len(self._data) == 0 or len(self._data) % self._frame_size != 0:
            raise SourceUnavailable(
                f"{path}: size {len(self._data)} is not a multiple of "
                f"frame size {self._frame_size}"
            )
        self.frame_count = len(self._data) // self._frame_size
        self._period = period
        self._index = -1        # before the first readout, frame 0 is visible
        self.bytes_read = 0

    def _frame(self) -> bytes:
        i = max(self._index, 0)
        return self._data[i * self._frame_size:(i + 1) * self._frame_size]

    def begin_readout(self) -> float:
        if self._index + 1 >= self.frame_count:
            raise SourceUnavailable("replay stream exhausted")
        self._index += 1
        return self._index * self._period

    def read_all(self) -> bytes:
        frame = self._frame()
        self.bytes_read += len(frame)
        return frame

    def read_at(self, offset: int, size: int) -> bytes:
        frame = self._frame()
        if offset + size > len(frame):
            raise OutOfBounds(f"read of {size} bytes at {offset} past frame end")
        self.bytes_read += size
        return frame[offset:offset + size]


def _read_optimized(source: ImageSource, locator: SensorLocator) -> SensorRecord:
    ping_valid = source.read_at(locator.ping_flag_offset, 1)[0] != 0
    pong_valid = source.read_at(locator.pong_flag_offset, 1)[0] != 0
    if not ping_valid and not pong_valid:
        raise NoValidBuffer("neither buffer valid")
    if ping_valid and not pong_valid:
        return SensorRecord(*RECORD.unpack(source.read_at(locator.ping_record_offset, RECORD_SIZE)))
    if pong_valid and not ping_valid:
        return SensorRecord(*RECORD.unpack(source.read_at(locator.pong_record_offset, RECORD_SIZE)))
    ping = SensorRecord(*RECORD.unpack(source.read_at(locator.ping_record_offset, RECORD_SIZE)))
    pong = SensorRecord(*RECORD.unpack(source.read_at(locator.pong_record_offset, RECORD_SIZE)))
    return pong if pong.timestamp > ping.timestamp else ping


def sample_loop(source: ImageSource, sensor: str, n: int,
                mode: ReadMode = ReadMode.OPTIMIZED) -> RawTrace:
    """Perform ``n`` back-to-back readouts of one sensor.

    Readouts that hit a torn snapshot (no valid buffer) are skipped and
    counted in ``failed_reads`` rather than aborting the loop.
    """
    if n < 2:
        raise ValueError(f"need at least 2 readouts, got {n}")
    probe = parse_image(source.read_all())
    locator = locate_sensor(probe, sensor)

    entries: list[TraceEntry | None] = [None] * n
    filled = 0
    failed = 0
    if mode is ReadMode.OPTIMIZED:
        for _ in range(n):
            t = source.begin_readout()
            try:
                record = _read_optimized(source, locator)
            except NoValidBuffer:
                failed += 1
                continue
            entries[filled] = TraceEntry(t, record)
            filled += 1
    else:
        for _ in range(n):
            t = source.begin_readout()
            image = parse_image(source.read_all())
            loc = locate_sensor(image, sensor)
            block = image.blocks[loc.block_index]
            try:
                choice = select_buffer(block)
            except NoValidBuffer:
                failed += 1
                continue
            buf = block.ping if choice is BufferChoice.PING else block.pong
            entries[filled] = TraceEntry(t, buf.records[loc.record_index])
            filled += 1
    return RawTrace(sensor=sensor, mode=mode, entries=entries[:filled], failed_reads=failed)


def latency_histogram(trace: RawTrace, bin_width: float) -> LatencyHistogram:
    """Histogram the spacings between successive readout host times."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if len(trace.entries) < 2:
        raise TooFewSamples("need at least 2 entries for readout spacings")
    diffs = np.diff(trace.host_times())
    indices = np.floor(diffs / bin_width).astype(int)
    bins: dict[int, int] = {}
    for idx, cnt in zip(*np.unique(indices, return_counts=True)):
        bins[int(idx)] = int(cnt)
    return LatencyHistogram(
        bin_width=bin_width,
        bins=bins,
        mean=float(diffs.mean()),
        count=int(diffs.size),
    )


def estimate_external_update_rate(trace: RawTrace,
                                  change_window: float = 0.060) -> UpdateRateEstimate:
    """Estimate the rate at which the interface exposes new values.

    A change is a readout whose sample or record timestamp differs from the
    previous readout's. Gaps between consecutive changes larger than
    ``change_window`` are discarded: the sensor most likely repeated an
    identical value across an update, so the gap spans more than one true
    update interval. The rate is the reciprocal of the mean kept gap.
    """
    if len(trace.entries) < 2:
        raise TooFewSamples("need at least 2 entries")
    times = trace.host_times()
    mean_spacing = float(np.diff(times).mean())
    if mean_spacing > change_window / 10:
        raise ValueError(
            f"trace too sparse for a {change_window * 1e3:.0f} ms change window: "
            f"mean readout spacing {mean_spacing * 1e3:.3f} ms"
        )
    samples = np.array([e.record.sample for e in trace.entries], dtype=np.uint64)
    stamps = np.array([e.record.timestamp for e in trace.entries], dtype=np.uint64)
    changed = (samples[1:] != samples[:-1]) | (stamps[1:] != stamps[:-1])
    change_times = times[1:][changed]
    if change_times.size < 2:
        raise NoChanges("fewer than two value changes in trace")
    gaps = np.diff(change_times)
    kept = gaps[gaps <= change_window]
    if kept.size == 0:
        raise NoChanges("all change gaps exceed the change window")
    mean_interval = float(kept.mean())
    return UpdateRateEstimate(
        rate_sa_s=1.0 / mean_interval,
        mean_interval_s=mean_interval,
        changes=int(change_times.size),
        kept_gaps=int(kept.size),
        dropped_gaps=int(gaps.size - kept.size),
    )


def save_trace(trace: RawTrace, path: str | Path) -> None:
    """Write a trace as CSV, one row per readout."""
    with open(path, "w", newline="") as handle:
        handle.write(TRACE_CSV_HEADER + "\n")
        for e in trace.entries:
            r = e.record
            handle.write(
                f"{e.host_time:.9f},{r.gsid},{r.timestamp},{r.sample},"
                f"{r.accumulator},{r.update_tag}\n"
            )


def load_trace(path: str | Path, sensor: str | None = None,
               mode: ReadMode = ReadMode.OPTIMIZED) -> RawTrace:
    """Read a trace CSV written by save_trace."""
    entries = []
    with open(path, newline="") as handle:
        header = handle.readline().strip()
        if header != TRACE_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in handle:
            line = line.strip()
            if not line:
                continue
            t, gsid, ts, sample, acc, tag = line.split(",")
            entries.append(TraceEntry(
                float(t),
                SensorRecord(int(gsid), int(ts), int(sample), int(acc), int(tag)),
            ))
    if sensor is None:
        sensor = f"gsid:{entries[0].record.gsid}" if entries else "unknown"
    return RawTrace(sensor=sensor, mode=mode, entries=entries)
