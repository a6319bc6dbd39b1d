"""Bit-exact codec for the OCC-IMAGE v1 binary sensor-image format.

An image file is a concatenation of fixed-size sensor data blocks, one per
processor. Block 0 additionally carries the system-level sensors (bulk power,
``PWRSYS``). All multi-byte fields are big-endian.

Block layout (153 600 bytes, canonical offsets)::

    offset    size          field
    0         4             signature "OCCS"
    4         1             version (0x01)
    5         1             reserved (zero)
    6         2             sensor_count          (u16)
    8         4             names_offset          (u32, canonical 32)
    12        4             ping_offset           (u32, canonical 57 344)
    16        4             pong_offset           (u32, canonical 102 400)
    20        ...           zero padding up to names_offset
    names     32 x count    sensor name entries
    ping      8 + 24 x count  reading buffer (valid flag + records)
    pong      8 + 24 x count  reading buffer (valid flag + records)
    ...       ...           zero padding up to 153 600

Name entry (32 bytes)::

    gsid u16 | name char[16] | units char[4] | kind u16 | location u16
    | sampling rate u32 (mSa/s) | 2 pad bytes

Reading buffer: ``valid`` u8 (0 or 1) plus 7 pad bytes, then one 24-byte
record per sensor in names-directory order.

Sensor record (24 bytes)::

    gsid u16 | timestamp u64 (512 MHz ticks) | sample u16 (W)
    | accumulator u64 (W*sample) | update_tag u32

Power samples have 1 W resolution; the accumulator is the running sum of all
internal samples and update_tag counts them, so dividing their deltas yields
average power over the interval.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from .errors import (
    CountError,
    InvariantError,
    LayoutError,
    NoValidBuffer,
    OutOfBounds,
    SensorNotFound,
    SignatureError,
    SizeError,
)

BLOCK_SIZE = 153_600
SIGNATURE = b"OCCS"
VERSION = 1

NAMES_OFFSET = 32
PING_OFFSET = 57_344
PONG_OFFSET = 102_400

HEADER = struct.Struct(">4sBxHIII")
NAME_ENTRY = struct.Struct(">H16s4sHHI2x")
RECORD = struct.Struct(">HQHQI")

NAME_ENTRY_SIZE = NAME_ENTRY.size      # 32
RECORD_SIZE = RECORD.size              # 24
BUFFER_HEADER_SIZE = 8                 # valid byte + 7 pad

# Timebase of the record timestamp field.
TIMEBASE_HZ = 512_000_000

KIND_POWER = 0x0001

LOCATION_SYSTEM = 0
LOCATION_PROCESSOR = 1
LOCATION_MEMORY = 2
LOCATION_GPU = 3

# Largest sensor count the canonical offsets can host (names directory is
# the binding region at 1791 entries).
MAX_SENSORS = min(
    (PING_OFFSET - NAMES_OFFSET) // NAME_ENTRY_SIZE,
    (PONG_OFFSET - PING_OFFSET - BUFFER_HEADER_SIZE) // RECORD_SIZE,
    (BLOCK_SIZE - PONG_OFFSET - BUFFER_HEADER_SIZE) // RECORD_SIZE,
)

_U16 = 1 << 16
_U32 = 1 << 32
_U64 = 1 << 64


class BufferChoice(enum.Enum):
    PING = "ping"
    PONG = "pong"


@dataclass
class SensorRecord:
    """One power sensor reading."""

    gsid: int
    timestamp: int        # ticks of the 512 MHz timebase
    sample: int           # instantaneous power in W (1 W resolution)
    accumulator: int      # running sum of internal samples, W*sample
    update_tag: int       # number of samples folded into the accumulator


@dataclass
class SensorNameEntry:
    """Directory entry describing one sensor."""

    gsid: int
    name: str
    units: str
    kind: int = KIND_POWER
    location: int = LOCATION_SYSTEM
    freq_mhz_thousandths: int = 2_000_000   # internal sampling rate in mSa/s


@dataclass
class ReadingBuffer:
    valid: bool
    records: list[SensorRecord] = field(default_factory=list)


@dataclass
class SensorDataBlock:
    names: list[SensorNameEntry]
    ping: ReadingBuffer
    pong: ReadingBuffer
    names_offset: int = NAMES_OFFSET
    ping_offset: int = PING_OFFSET
    pong_offset: int = PONG_OFFSET

    @property
    def sensor_count(self) -> int:
        return len(self.names)


@dataclass
class SensorImage:
    """Parsed multi-block sensor memory image."""

    blocks: list[SensorDataBlock]


@dataclass(frozen=True)
class SensorLocator:
    """Byte addresses of one sensor's records, valid while the layout holds.

    The flag offsets address the 1-byte valid markers of both buffers; the
    record offsets address the sensor's 24-byte record in each buffer. The
    pong offsets differ from the ping offsets by a constant displacement
    given by the block layout.
    """

    block_index: int
    record_index: int
    ping_flag_offset: int
    pong_flag_offset: int
    ping_record_offset: int
    pong_record_offset: int


def _buffer_recency(buf: ReadingBuffer) -> int:
    # Recency of a buffer is its first record's timestamp; all records in a
    # buffer are committed together. Empty buffers compare as 0.
    return buf.records[0].timestamp if buf.records else 0


def ticks_to_seconds(ticks: int) -> float:
    """Convert a timestamp tick count to seconds."""
    return ticks / TIMEBASE_HZ


def select_buffer(block: SensorDataBlock) -> BufferChoice:
    """Pick the reading buffer to consume from ``block``.

    Exactly one valid flag set selects that buffer. With both set, the
    buffer whose first record carries the larger timestamp wins; equal
    timestamps select ping. Raises NoValidBuffer if neither flag is set.
    """
    if block.ping.valid and not block.pong.valid:
        return BufferChoice.PING
    if block.pong.valid and not block.ping.valid:
        return BufferChoice.PONG
    if not block.ping.valid and not block.pong.valid:
        raise NoValidBuffer("neither ping nor pong buffer is valid")
    if _buffer_recency(block.pong) > _buffer_recency(block.ping):
        return BufferChoice.PONG
    return BufferChoice.PING


def chosen_buffer(block: SensorDataBlock) -> ReadingBuffer:
    """Return the ReadingBuffer selected by select_buffer."""
    return block.ping if select_buffer(block) is BufferChoice.PING else block.pong


def _check_layout(names_offset: int, ping_offset: int, pong_offset: int, count: int,
                  layout_exc: type[Exception], count_exc: type[Exception]) -> None:
    if not (HEADER.size <= names_offset < ping_offset < pong_offset < BLOCK_SIZE):
        raise layout_exc(
            f"offsets out of order or outside block: "
            f"names={names_offset} ping={ping_offset} pong={pong_offset}"
        )
    names_end = names_offset + count * NAME_ENTRY_SIZE
    ping_end = ping_offset + BUFFER_HEADER_SIZE + count * RECORD_SIZE
    pong_end = pong_offset + BUFFER_HEADER_SIZE + count * RECORD_SIZE
    if names_end > ping_offset or ping_end > pong_offset or pong_end > BLOCK_SIZE:
        raise count_exc(
            f"sensor_count={count} does not fit the regions "
            f"(names end {names_end}, ping end {ping_end}, pong end {pong_end})"
        )


def _decode_ascii(raw: bytes) -> str:
    return raw.rstrip(b"\x00").decode("ascii")


def _parse_record(data: bytes, offset: int) -> SensorRecord:
    gsid, timestamp, sample, accumulator, update_tag = RECORD.unpack_from(data, offset)
    return SensorRecord(gsid, timestamp, sample, accumulator, update_tag)


def _parse_buffer(data: bytes, offset: int, count: int) -> ReadingBuffer:
    valid = data[offset] != 0
    records = [
        _parse_record(data, offset + BUFFER_HEADER_SIZE + i * RECORD_SIZE)
        for i in range(count)
    ]
    return ReadingBuffer(valid=valid, records=records)


def parse_image(data: bytes) -> SensorImage:
    """Decode a byte sequence into a SensorImage.

    Decoding is total: every block, name entry, and both buffers are
    materialized eagerly, and unknown kind values are preserved. Buffer
    validity is not judged here; selection is a separate concern.
    """
    if len(data) == 0 or len(data) % BLOCK_SIZE != 0:
        raise SizeError(
            f"image length {len(data)} is not a positive multiple of {BLOCK_SIZE}"
        )
    blocks = []
    for base in range(0, len(data), BLOCK_SIZE):
        signature, version, count, names_offset, ping_offset, pong_offset = (
            HEADER.unpack_from(data, base)
        )
        if signature != SIGNATURE or version != VERSION:
            raise SignatureError(
                f"block at {base}: signature {signature!r} version {version}"
            )
        _check_layout(names_offset, ping_offset, pong_offset, count,
                      LayoutError, CountError)
        names = []
        for i in range(count):
            gsid, name_raw, units_raw, kind, location, freq = NAME_ENTRY.unpack_from(
                data, base + names_offset + i * NAME_ENTRY_SIZE
            )
            names.append(
                SensorNameEntry(gsid, _decode_ascii(name_raw), _decode_ascii(units_raw),
                                kind, location, freq)
            )
        blocks.append(
            SensorDataBlock(
                names=names,
                ping=_parse_buffer(data, base + ping_offset, count),
                pong=_parse_buffer(data, base + pong_offset, count),
                names_offset=names_offset,
                ping_offset=ping_offset,
                pong_offset=pong_offset,
            )
        )
    return SensorImage(blocks=blocks)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvariantError(message)


def _encode_record(record: SensorRecord) -> bytes:
    _require(0 <= record.gsid < _U16, f"gsid {record.gsid} out of range")
    _require(0 <= record.timestamp < _U64, "timestamp out of range")
    _require(0 <= record.sample < _U16, f"sample {record.sample} out of range")
    _require(0 <= record.accumulator < _U64, "accumulator out of range")
    _require(0 <= record.update_tag < _U32, "update_tag out of range")
    return RECORD.pack(record.gsid, record.timestamp, record.sample,
                       record.accumulator, record.update_tag)


def _encode_ascii(text: str, size: int, what: str) -> bytes:
    raw = text.encode("ascii")
    _require(len(raw) <= size, f"{what} {text!r} longer than {size} bytes")
    return raw.ljust(size, b"\x00")


def _encode_block(block: SensorDataBlock) -> bytes:
    count = block.sensor_count
    _check_layout(block.names_offset, block.ping_offset, block.pong_offset,
                  count, InvariantError, InvariantError)
    _require(len(block.ping.records) == count and len(block.pong.records) == count,
             "buffer record count differs from sensor_count")
    seen_names = {e.name for e in block.names}
    seen_gsids = {e.gsid for e in block.names}
    _require(len(seen_names) == count, "duplicate sensor name in block")
    _require(len(seen_gsids) == count, "duplicate gsid in block")

    out = bytearray(BLOCK_SIZE)
    HEADER.pack_into(out, 0, SIGNATURE, VERSION, count,
                     block.names_offset, block.ping_offset, block.pong_offset)
    for i, entry in enumerate(block.names):
        _require(0 <= entry.gsid < _U16, f"gsid {entry.gsid} out of range")
        _require(0 <= entry.kind < _U16, "kind out of range")
        _require(0 <= entry.location < _U16, "location out of range")
        _require(0 <= entry.freq_mhz_thousandths < _U32, "sampling rate out of range")
        if entry.kind == KIND_POWER:
            _require(entry.units == "W", f"power sensor {entry.name!r} must use units 'W'")
        NAME_ENTRY.pack_into(
            out, block.names_offset + i * NAME_ENTRY_SIZE,
            entry.gsid,
            _encode_ascii(entry.name, 16, "name"),
            _encode_ascii(entry.units, 4, "units"),
            entry.kind, entry.location, entry.freq_mhz_thousandths,
        )
    for offset, buf in ((block.ping_offset, block.ping), (block.pong_offset, block.pong)):
        out[offset] = 1 if buf.valid else 0
        pos = offset + BUFFER_HEADER_SIZE
        for record in buf.records:
            out[pos:pos + RECORD_SIZE] = _encode_record(record)
            pos += RECORD_SIZE
    return bytes(out)


def encode_image(image: SensorImage) -> bytes:
    """Encode a SensorImage into canonical bytes.

    Deterministic: identical images produce identical bytes, and
    ``parse_image(encode_image(x)) == x``.
    """
    _require(len(image.blocks) > 0, "image has no blocks")
    return b"".join(_encode_block(block) for block in image.blocks)


def locate_sensor(image: SensorImage, name: str) -> SensorLocator:
    """Find the first sensor called ``name``, scanning blocks in order.

    The returned locator addresses the sensor's records and the buffer valid
    flags by absolute byte offset, enabling repeated reads without re-parsing
    (the layout is assumed to stay constant between snapshots).
    """
    for block_index, block in enumerate(image.blocks):
        for record_index, entry in enumerate(block.names):
            if entry.name == name:
                base = block_index * BLOCK_SIZE
                record_shift = BUFFER_HEADER_SIZE + record_index * RECORD_SIZE
                return SensorLocator(
                    block_index=block_index,
                    record_index=record_index,
                    ping_flag_offset=base + block.ping_offset,
                    pong_flag_offset=base + block.pong_offset,
                    ping_record_offset=base + block.ping_offset + record_shift,
                    pong_record_offset=base + block.pong_offset + record_shift,
                )
    raise SensorNotFound(f"sensor {name!r} not present in image")


@dataclass(frozen=True)
class RecordReadout:
    """Result of a record-granular read: both records plus the chosen one."""

    ping: SensorRecord
    pong: SensorRecord
    chosen: SensorRecord
    chosen_buffer: BufferChoice


def read_record_at(data: bytes, locator: SensorLocator) -> RecordReadout:
    """Read one sensor's records straight from image bytes.

    Touches only the two 24-byte record regions and the two valid flags.
    Selection follows the select_buffer rule at record granularity, which
    matches block-level selection whenever both buffers were committed
    atomically (uniform record timestamps per buffer).
    """
    end = max(locator.ping_record_offset, locator.pong_record_offset) + RECORD_SIZE
    flags_end = max(locator.ping_flag_offset, locator.pong_flag_offset) + 1
    if end > len(data) or flags_end > len(data):
        raise OutOfBounds(f"locator needs {end} bytes, image has {len(data)}")
    ping_valid = data[locator.ping_flag_offset] != 0
    pong_valid = data[locator.pong_flag_offset] != 0
    ping = _parse_record(data, locator.ping_record_offset)
    pong = _parse_record(data, locator.pong_record_offset)
    if not ping_valid and not pong_valid:
        raise NoValidBuffer("neither buffer valid at locator")
    if ping_valid and not pong_valid:
        choice = BufferChoice.PING
    elif pong_valid and not ping_valid:
        choice = BufferChoice.PONG
    elif pong.timestamp > ping.timestamp:
        choice = BufferChoice.PONG
    else:
        choice = BufferChoice.PING
    chosen = ping if choice is BufferChoice.PING else pong
    return RecordReadout(ping=ping, pong=pong, chosen=chosen, chosen_buffer=choice)
