"""Trace data model: probe-request records and per-stay extremity reduction.

Input traces are CSV streams with header ``device,station,timestamp``
(opaque device token, 0-based station index along the line, integer
seconds). A device lingering at one station produces a long run of
records; only the first and last record of each contiguous same-station
run carry information, so streams are reduced to ``ExtremityRecord``
before journey extraction.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import IO, Iterable

from .errors import DataError

CSV_HEADER = "device,station,timestamp"


@dataclass(frozen=True, order=True)
class WifiRecord:
    """One passive observation of a device at a station."""

    device: str
    station: int
    timestamp: int

    def __post_init__(self):
        if not self.device:
            raise ValueError("device token must be non-empty")
        if self.station < 0:
            raise ValueError("station index must be >= 0")
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")


@dataclass(frozen=True)
class ExtremityRecord:
    """First and last sighting of a device during one contiguous stay."""

    device: str
    station: int
    first: int
    last: int

    def __post_init__(self):
        if self.first > self.last:
            raise ValueError("extremity first > last")

    @property
    def span(self) -> int:
        return self.last - self.first


@dataclass
class ParseResult:
    records: list[WifiRecord]
    skipped: int


def parse_records(stream: IO[bytes] | IO[str]) -> ParseResult:
    """Parse a record CSV stream.

    Returns records in input order. Malformed body lines are skipped and
    counted in ``ParseResult.skipped``; a missing or wrong header is fatal.
    """
    if hasattr(stream, "read") and isinstance(stream.read(0), bytes):
        stream = io.TextIOWrapper(stream, encoding="utf-8")  # type: ignore[arg-type]
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty stream: expected header %r" % CSV_HEADER)
    if [c.strip().lstrip("﻿") for c in header] != CSV_HEADER.split(","):
        raise DataError("bad header %r, expected %r" % (",".join(header), CSV_HEADER))
    records: list[WifiRecord] = []
    skipped = 0
    for row in reader:
        if not row:
            continue
        try:
            device, station, ts = row
            records.append(WifiRecord(device.strip(), int(station), int(ts)))
        except (ValueError, TypeError):
            skipped += 1
    return ParseResult(records, skipped)


def read_records(path) -> ParseResult:
    with open(path, "rb") as fh:
        return parse_records(fh)


def serialize_records(records: Iterable[WifiRecord], stream: IO[str]) -> None:
    stream.write(CSV_HEADER + "\n")
    for r in records:
        stream.write(f"{r.device},{r.station},{r.timestamp}\n")


def write_records(records: Iterable[WifiRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        serialize_records(records, fh)


def dedup_records(records: list[WifiRecord]) -> list[WifiRecord]:
    """Drop exact duplicates (APs may pre-aggregate to whole seconds),
    preserving first occurrence order."""
    seen = set()
    out = []
    for r in records:
        key = (r.device, r.station, r.timestamp)
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def sort_records(records: Iterable[WifiRecord]) -> list[WifiRecord]:
    """Canonical ordering: device, then time, then station."""
    return sorted(records, key=lambda r: (r.device, r.timestamp, r.station))


def group_by_device(records: Iterable[WifiRecord]) -> dict[str, list[WifiRecord]]:
    groups: dict[str, list[WifiRecord]] = {}
    for r in records:
        groups.setdefault(r.device, []).append(r)
    return {dev: groups[dev] for dev in sorted(groups)}


def reduce_extremities(records: list[WifiRecord]) -> list[ExtremityRecord]:
    """Collapse a single device's sorted stream to one extremity per
    contiguous same-station run.

    Raises DataError on unsorted input or mixed devices.
    """
    if not records:
        return []
    device = records[0].device
    out: list[ExtremityRecord] = []
    cur_station = records[0].station
    first = last = records[0].timestamp
    for r in records[1:]:
        if r.device != device:
            raise DataError("reduce_extremities expects a single device")
        if r.timestamp < last:
            raise DataError("records must be sorted by timestamp")
        if r.station == cur_station:
            last = r.timestamp
        else:
            out.append(ExtremityRecord(device, cur_station, first, last))
            cur_station = r.station
            first = last = r.timestamp
    out.append(ExtremityRecord(device, cur_station, first, last))
    return out
