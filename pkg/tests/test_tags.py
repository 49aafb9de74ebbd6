import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autohet.errors import TagFileError
from autohet.simulate import TimeTagStream
from autohet.tags import MAGIC, read_tags, read_tags_csv, write_tags, write_tags_csv

HEADER = {"tick_seconds": 625e-12, "channel_names": ["C", "D"], "start_time": 0.0,
          "seed": 7, "config_digest": "abc"}


def make_stream(n, seed=0):
    rng = np.random.default_rng(seed)
    ticks = np.sort(rng.integers(0, 2 ** 40, n, dtype=np.uint64))
    return TimeTagStream(dict(HEADER), rng.integers(0, 2, n, dtype=np.uint8), ticks)


def test_round_trip_million_records(tmp_path):
    s = make_stream(1_000_000)
    p = write_tags(s, tmp_path / "t.bin")
    back = read_tags(p)
    assert np.array_equal(back.ticks, s.ticks) and np.array_equal(back.channels, s.channels)
    assert back.header == s.header
    write_tags(back, tmp_path / "u.bin")
    assert (tmp_path / "t.bin").read_bytes() == (tmp_path / "u.bin").read_bytes()


def test_tick_seconds_exact(tmp_path):
    back = read_tags(write_tags(make_stream(3), tmp_path / "t.bin"))
    assert back.tick_seconds == 625e-12
    assert struct.pack("<d", back.tick_seconds) == struct.pack("<d", 625e-12)


def test_truncated_file_names_record(tmp_path):
    p = write_tags(make_stream(100), tmp_path / "t.bin")
    data = p.read_bytes()
    p.write_bytes(data[:-9 * 40 - 4])
    with pytest.raises(TagFileError) as exc:
        read_tags(p)
    assert exc.value.record == 59
    assert "record 59" in str(exc.value)


def test_bad_magic_and_trailing_data(tmp_path):
    p = write_tags(make_stream(10), tmp_path / "t.bin")
    data = p.read_bytes()
    (tmp_path / "m.bin").write_bytes(b"X" + data[1:])
    with pytest.raises(TagFileError, match="magic"):
        read_tags(tmp_path / "m.bin")
    (tmp_path / "x.bin").write_bytes(data + bytes(9))
    with pytest.raises(TagFileError, match="trailing"):
        read_tags(tmp_path / "x.bin")


def test_decreasing_ticks_detected(tmp_path):
    p = write_tags(make_stream(10), tmp_path / "t.bin")
    data = bytearray(p.read_bytes())
    hlen = struct.unpack_from("<I", data, len(MAGIC))[0]
    body = len(MAGIC) + 4 + hlen
    struct.pack_into("<Q", data, body + 9 * 5 + 1, 0)
    p.write_bytes(bytes(data))
    with pytest.raises(TagFileError) as exc:
        read_tags(p)
    assert exc.value.record == 5


def test_csv_round_trip(tmp_path):
    s = make_stream(500)
    back = read_tags_csv(write_tags_csv(s, tmp_path / "t.csv"))
    assert np.array_equal(back.ticks, s.ticks) and np.array_equal(back.channels, s.channels)
    assert back.tick_seconds == s.tick_seconds


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 2 ** 64 - 1)), max_size=50))
def test_round_trip_property(tmp_path_factory, recs):
    recs = sorted(recs, key=lambda r: r[1])
    ch = np.array([r[0] for r in recs], dtype=np.uint8)
    tk = np.array([r[1] for r in recs], dtype=np.uint64)
    s = TimeTagStream(dict(HEADER), ch, tk)
    p = tmp_path_factory.mktemp("tags") / "t.bin"
    back = read_tags(write_tags(s, p))
    assert np.array_equal(back.ticks, tk) and np.array_equal(back.channels, ch)
