"""Time-tag file formats.

Binary layout (all integers little-endian)::

    offset 0   8 bytes   magic b"AHTAGS\\r\\n"
    offset 8   u32       header length H in bytes
    offset 12  H bytes   UTF-8 JSON header
    offset 12+H          n_records x 9-byte records {u8 channel, u64 tick}

The header holds ``version`` (currently 1), ``n_records``, ``tick_seconds``,
``channel_names``, ``start_time``, ``seed``, ``config_digest`` and an
optional ``detectors`` echo.  Floats are written with Python's shortest
round-trip repr, so ``tick_seconds`` reads back bit-exactly.

The CSV debug format has a ``channel,tick`` header line followed by one
record per line; the JSON header is stored as a ``# `` comment line above it.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import TagFileError
from .simulate import TimeTagStream

MAGIC = b"AHTAGS\r\n"
VERSION = 1
RECORD_DTYPE = np.dtype([("channel", "u1"), ("tick", "<u8")])
assert RECORD_DTYPE.itemsize == 9

_REQUIRED = ("version", "n_records", "tick_seconds", "channel_names")


def _header_for(stream):
    header = dict(stream.header)
    header["version"] = VERSION
    header["n_records"] = len(stream)
    return header


def write_tags(stream, path):
    path = Path(path)
    header = json.dumps(_header_for(stream), sort_keys=True).encode("utf-8")
    records = np.empty(len(stream), dtype=RECORD_DTYPE)
    records["channel"] = stream.channels
    records["tick"] = stream.ticks
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(records.tobytes())
    return path


def _check_monotone(ticks, body_offset):
    if ticks.size > 1:
        bad = np.flatnonzero(ticks[1:] < ticks[:-1])
        if bad.size:
            rec = int(bad[0]) + 1
            raise TagFileError("ticks decrease", offset=body_offset + 9 * rec, record=rec)


def _check_header(header, offset):
    if not isinstance(header, dict):
        raise TagFileError("header is not a JSON object", offset=offset)
    missing = [k for k in _REQUIRED if k not in header]
    if missing:
        raise TagFileError(f"header lacks {', '.join(missing)}", offset=offset)
    if header["version"] != VERSION:
        raise TagFileError(f"unsupported tag file version {header['version']!r}", offset=offset)


def read_tags(path):
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4:
        raise TagFileError("file too short for a tag header", offset=len(data))
    if data[:len(MAGIC)] != MAGIC:
        raise TagFileError("bad magic, not a time-tag file", offset=0)
    (hlen,) = struct.unpack_from("<I", data, len(MAGIC))
    hstart = len(MAGIC) + 4
    body = hstart + hlen
    if body > len(data):
        raise TagFileError("header runs past end of file", offset=len(data))
    try:
        header = json.loads(data[hstart:body].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        pos = getattr(exc, "pos", getattr(exc, "start", 0))
        raise TagFileError(f"corrupt header: {exc}", offset=hstart + pos) from None
    _check_header(header, hstart)
    n_bytes = len(data) - body
    n_full, rest = divmod(n_bytes, RECORD_DTYPE.itemsize)
    n = int(header["n_records"])
    if rest or n_full < n:
        rec = min(n_full, n)
        raise TagFileError(f"truncated record data, expected {n} records",
                           offset=body + RECORD_DTYPE.itemsize * rec, record=rec)
    if n_full > n:
        raise TagFileError(f"trailing data after {n} records",
                           offset=body + RECORD_DTYPE.itemsize * n, record=n)
    records = np.frombuffer(data, dtype=RECORD_DTYPE, count=n, offset=body)
    ticks = records["tick"].astype(np.uint64)
    channels = records["channel"].astype(np.uint8)
    _check_monotone(ticks, body)
    n_ch = len(header["channel_names"])
    if channels.size and int(channels.max()) >= n_ch:
        rec = int(np.flatnonzero(channels >= n_ch)[0])
        raise TagFileError("channel index outside channel_names",
                           offset=body + RECORD_DTYPE.itemsize * rec, record=rec)
    header = {k: v for k, v in header.items() if k not in ("version", "n_records")}
    return TimeTagStream(header, channels, ticks)


def write_tags_csv(stream, path):
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(_header_for(stream), sort_keys=True) + "\n")
        fh.write("channel,tick\n")
        for ch, tk in zip(stream.channels.tolist(), stream.ticks.tolist()):
            fh.write(f"{ch},{tk}\n")
    return path


def read_tags_csv(path):
    lines = Path(path).read_text().splitlines()
    offset = 0
    header = None
    rows = []
    for lineno, line in enumerate(lines):
        if lineno == 0 and line.startswith("# "):
            try:
                header = json.loads(line[2:])
            except json.JSONDecodeError as exc:
                raise TagFileError(f"corrupt header: {exc}", offset=2 + exc.pos) from None
        elif line.strip() == "channel,tick":
            pass
        elif line.strip():
            try:
                ch, tk = line.split(",")
                rows.append((int(ch), int(tk)))
            except ValueError:
                raise TagFileError(f"malformed line {line!r}", offset=offset,
                                   record=len(rows)) from None
        offset += len(line) + 1
    if header is None:
        raise TagFileError("missing header comment", offset=0)
    _check_header(header, 2)
    arr = np.array(rows, dtype=np.uint64).reshape(-1, 2)
    ticks = arr[:, 1]
    if ticks.size > 1:
        bad = np.flatnonzero(ticks[1:] < ticks[:-1])
        if bad.size:
            raise TagFileError("ticks decrease", record=int(bad[0]) + 1)
    header = {k: v for k, v in header.items() if k not in ("version", "n_records")}
    return TimeTagStream(header, arr[:, 0].astype(np.uint8), ticks)
