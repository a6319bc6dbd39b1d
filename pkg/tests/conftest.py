"""Shared builders for randomized images and small simulator configs."""

import random
import string

import pytest

from occtool.occ_image import (
    KIND_POWER,
    LOCATION_PROCESSOR,
    ReadingBuffer,
    SensorDataBlock,
    SensorImage,
    SensorNameEntry,
    SensorRecord,
)
from occtool.occ_sim import SimConfig, SimSensor, WorkloadSignal

_U16 = 1 << 16
_U32 = 1 << 32
_U64 = 1 << 64


def make_record(rng: random.Random, gsid: int, timestamp: int | None = None) -> SensorRecord:
    return SensorRecord(
        gsid=gsid,
        timestamp=rng.randrange(_U64) if timestamp is None else timestamp,
        sample=rng.randrange(_U16),
        accumulator=rng.randrange(_U64),
        update_tag=rng.randrange(_U32),
    )


def make_names(rng: random.Random, count: int) -> list[SensorNameEntry]:
    names: list[SensorNameEntry] = []
    used_names: set[str] = set()
    used_gsids: set[int] = set()
    while len(names) < count:
        name = "".join(rng.choices(string.ascii_uppercase, k=rng.randint(3, 16)))
        gsid = rng.randrange(_U16)
        if name in used_names or gsid in used_gsids:
            continue
        used_names.add(name)
        used_gsids.add(gsid)
        if rng.random() < 0.7:
            kind, units = KIND_POWER, "W"
        else:
            # Opaque non-power kinds must survive the codec untouched.
            kind = rng.choice([0x0002, 0x0010, 0x7FFF])
            units = rng.choice(["C", "%", "GHz", ""])
        names.append(SensorNameEntry(
            gsid=gsid, name=name, units=units, kind=kind,
            location=rng.randrange(4),
            freq_mhz_thousandths=rng.choice([1_000_000, 2_000_000]),
        ))
    return names


def make_buffer(rng: random.Random, names, valid: bool, committed: bool) -> ReadingBuffer:
    # Committed buffers share one timestamp across records, the shape a
    # whole-buffer rewrite produces.
    stamp = rng.randrange(_U64) if committed else None
    return ReadingBuffer(
        valid=valid,
        records=[make_record(rng, entry.gsid, stamp) for entry in names],
    )


def make_block(rng: random.Random, committed: bool = True,
               allow_invalid: bool = False) -> SensorDataBlock:
    names = make_names(rng, rng.randint(1, 8))
    combos = [(True, True), (True, False), (False, True)]
    if allow_invalid:
        combos.append((False, False))
    ping_valid, pong_valid = rng.choice(combos)
    return SensorDataBlock(
        names=names,
        ping=make_buffer(rng, names, ping_valid, committed),
        pong=make_buffer(rng, names, pong_valid, committed),
    )


def make_image(rng: random.Random, committed: bool = True,
               allow_invalid: bool = False, max_blocks: int = 2) -> SensorImage:
    return SensorImage(blocks=[
        make_block(rng, committed, allow_invalid)
        for _ in range(rng.randint(1, max_blocks))
    ])


def single_sensor_config(signal: WorkloadSignal, name: str = "PWRPROC",
                         **overrides) -> SimConfig:
    entry = SensorNameEntry(gsid=2, name=name, units="W",
                            location=LOCATION_PROCESSOR)
    return SimConfig(sensors=[SimSensor(entry=entry, signal=signal)], **overrides)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)
