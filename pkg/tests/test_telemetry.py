"""Tests for the JSON-lines telemetry writer and summary files."""

import json

import pytest

from telewalk.telemetry import (
    SCHEMA_VERSION,
    ListSink,
    TelemetryWriter,
    load_summary,
    load_telemetry,
    write_summary,
)


def write_file(path, ticks):
    with TelemetryWriter(path) as w:
        w.write_header({"scenario": "stand", "dt": 1e-3})
        for r in ticks:
            w.write_tick(r)


class TestWriter:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "telemetry.jsonl"
        ticks = [{"type": "tick", "t": i * 1e-3, "com_x": 0.1 * i} for i in range(5)]
        write_file(path, ticks)
        header, loaded = load_telemetry(path)
        assert header["schema_version"] == SCHEMA_VERSION
        assert header["config"]["scenario"] == "stand"
        assert loaded == ticks

    def test_header_required_first(self, tmp_path):
        w = TelemetryWriter(tmp_path / "t.jsonl")
        with pytest.raises(RuntimeError):
            w.write_tick({"type": "tick", "t": 0.0})
        w.close()

    def test_one_json_object_per_line(self, tmp_path):
        path = tmp_path / "t.jsonl"
        write_file(path, [{"type": "tick", "t": 0.0, "grfs": {"left_toe": [0, 0, 9.8]}}])
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        for line in lines:
            json.loads(line)

    def test_identical_input_identical_bytes(self, tmp_path):
        ticks = [{"type": "tick", "t": i * 1e-3, "v": [i, 2 * i]} for i in range(20)]
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_file(a, ticks)
        write_file(b, ticks)
        assert a.read_bytes() == b.read_bytes()

    def test_non_finite_rejected(self, tmp_path):
        # NaN would otherwise serialize as non-standard JSON and break
        # byte-stable replays; the writer refuses it outright.
        w = TelemetryWriter(tmp_path / "t.jsonl")
        w.write_header({})
        with pytest.raises(ValueError):
            w.write_tick({"type": "tick", "t": 0.0, "com_x": float("nan")})
        w.close()


class TestListSink:
    def test_collects_in_memory(self):
        sink = ListSink()
        sink.write_header({"scenario": "stand"})
        sink.write_tick({"type": "tick", "t": 0.0})
        sink.write_tick({"type": "tick", "t": 1e-3})
        assert sink.header["schema_version"] == SCHEMA_VERSION
        assert [r["t"] for r in sink.records] == [0.0, 1e-3]


class TestSummary:
    def test_summary_round_trip(self, tmp_path):
        path = tmp_path / "summary.json"
        summary = {"verdict": "completed", "distance_x": 6.25, "falls": 0}
        write_summary(path, summary)
        assert load_summary(path) == summary
