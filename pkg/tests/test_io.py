import json

import numpy as np
import pytest

from tripletflow import io
from tripletflow.events import EmptyStreamError, Event, EventBatch
from tripletflow.matcher import process_batch
from tripletflow.postprocess import DenseFlow


def test_parse_microsecond_decimal(tmp_path):
    f = tmp_path / "ev.txt"
    f.write_text("# t x y p\n1.000001 12 10 1\n\n1.5 3 4 0\n")
    b = io.read_events(f, (20, 20))
    assert list(b) == [Event(1_000_001, 12, 10, 1), Event(1_500_000, 3, 4, -1)]


def test_parse_bad_polarity_names_line(tmp_path):
    f = tmp_path / "ev.txt"
    f.write_text("0.5 1 1 1\n1.0 12 10 2\n")
    with pytest.raises(io.EventParseError, match="polarity") as exc:
        io.read_events(f, (20, 20))
    assert exc.value.lineno == 2
    assert ":2:" in str(exc.value)


@pytest.mark.parametrize("text", ["1.0 12 10\n", "abc 1 1 1\n", "-1.0 1 1 1\n"])
def test_parse_malformed(tmp_path, text):
    f = tmp_path / "ev.txt"
    f.write_text(text)
    with pytest.raises(io.EventParseError):
        io.read_events(f, (20, 20))


def test_parse_empty(tmp_path):
    f = tmp_path / "ev.txt"
    f.write_text("# nothing\n")
    with pytest.raises(EmptyStreamError):
        io.read_events(f)


def test_resolution_sources(tmp_path):
    f = tmp_path / "ev.txt"
    f.write_text("0.1 5 2 1\n")
    assert io.read_events(f).resolution == (6, 3)
    (tmp_path / "ev.json").write_text(json.dumps({"resolution": [64, 48]}))
    assert io.read_events(f).resolution == (64, 48)
    assert io.read_events(f, (10, 10)).resolution == (10, 10)


def test_events_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    n = 200
    b = EventBatch(np.sort(rng.integers(0, 5 * 10**6, n)), rng.integers(0, 30, n), rng.integers(0, 20, n),
                   rng.choice([-1, 1], n), (30, 20))
    io.write_events(tmp_path / "e.txt", b, header="test")
    assert io.read_events(tmp_path / "e.txt", (30, 20)) == b


def test_format_seconds():
    assert io.format_seconds(1_000_001) == "1.000001"
    assert io.format_seconds(5) == "0.000005"


def test_flo_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    flow = rng.normal(size=(5, 7, 2)).astype(np.float32).astype(np.float64)
    valid = rng.random((5, 7)) < 0.7
    io.write_flo(tmp_path / "a.flo", DenseFlow(flow, valid))
    raw = (tmp_path / "a.flo").read_bytes()
    assert raw[:4] == b"PIEH"
    assert np.frombuffer(raw[4:12], "<i4").tolist() == [7, 5]
    assert len(raw) == 12 + 5 * 7 * 2 * 4
    back = io.read_flo(tmp_path / "a.flo")
    np.testing.assert_array_equal(back.valid, valid)
    np.testing.assert_array_equal(back.flow[valid], flow[valid])


def test_flo_bad_magic(tmp_path):
    (tmp_path / "x.flo").write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(ValueError, match="magic"):
        io.read_flo(tmp_path / "x.flo")


def test_flow_records_round_trip(tmp_path, example_a):
    r = process_batch(example_a)
    io.write_flow_records(tmp_path / "f.txt", example_a, r)
    back = io.read_flow_records(tmp_path / "f.txt")
    np.testing.assert_array_equal(np.isnan(back), np.isnan(r.flow_array()))
    assert back[2].tolist() == [200.0, 0.0]


def test_read_config(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# matcher\ndt-ms = 50\ntau_ms=2  # inline\n\n")
    assert io.read_config(f) == {"dt_ms": "50", "tau_ms": "2"}
    f.write_text("oops\n")
    with pytest.raises(ValueError, match=":1:"):
        io.read_config(f)
