import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmmpp import (
    BmmppError, RawPacketTrace, aggregate_format1, aggregate_format2, read_raw_trace,
    summary_stats, synthetic_packet_trace,
)
from bmmpp.traceio import write_raw_trace


def test_same_bin_is_one_event():
    raw = RawPacketTrace([0.0101, 0.01012, 0.0105], [100, 200, 300])
    tr, rep = aggregate_format1(raw, 1e-3)
    assert len(tr) == 1 and tr.b[0] == 3
    assert tr.t[0] == pytest.approx(0.010)
    assert rep.n_packets == 3 and rep.rejected_events == 0


def test_empty_bins_become_gap():
    raw = RawPacketTrace([0.0025, 0.0071, 0.0072], [64, 64, 64])
    tr, _ = aggregate_format1(raw, 1e-3)
    np.testing.assert_allclose(tr.t, [0.002, 0.005])
    np.testing.assert_array_equal(tr.b, [1, 2])


def test_first_gap_at_least_one_bin():
    tr, _ = aggregate_format1(RawPacketTrace([0.0002, 0.0031], [64, 64]), 1e-3)
    np.testing.assert_allclose(tr.t, [0.001, 0.003])


def test_cap_rejects_and_merges():
    ts = [0.0011, 0.0021, 0.0022, 0.0023, 0.0024, 0.0025, 0.0041]
    tr, rep = aggregate_format1(RawPacketTrace(ts, [64] * 7), 1e-3, cap=4)
    assert rep.rejected_events == 1 and rep.rejected_packets == 5
    np.testing.assert_allclose(tr.t, [0.001, 0.003])


def test_size_labels():
    raw = RawPacketTrace([0.1, 0.2], [64, 1518], ethernet=True)
    assert list(aggregate_format2(raw)[0].b) == [1, 2]
    assert list(aggregate_format2(raw, threshold=64)[0].b) == [2, 2]


def test_zero_gaps_are_floored():
    tr, rep = aggregate_format2(RawPacketTrace([0.5, 0.5, 0.7], [64, 64, 64]))
    np.testing.assert_allclose(tr.t, [0.5, 1e-6, 0.2])
    assert rep.floored_gaps == 1


@given(st.lists(st.integers(1, 10_000), min_size=1, max_size=200),
       st.sampled_from([1e-3, 5e-3, 0.1]))
@settings(max_examples=60)
def test_format1_conserves_packets(us, width):
    ts = np.sort(np.array(us)) * 1e-6
    tr, rep = aggregate_format1(RawPacketTrace(ts, np.full(ts.size, 500)), width,
                                cap=10_000)
    assert tr.b.sum() == len(ts) == rep.n_packets
    assert rep.rejected_events == 0
    # event times sit on the grid and never run ahead of the last packet
    ends = np.cumsum(tr.t)
    np.testing.assert_allclose(ends / width, np.round(ends / width), atol=1e-6)
    assert ends[-1] <= ts[-1] + width


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=200),
       st.lists(st.integers(64, 1518), min_size=200, max_size=200))
def test_format2_keeps_every_packet(us, sizes):
    ts = np.sort(np.array(us)) * 1e-6
    tr, rep = aggregate_format2(RawPacketTrace(ts, sizes[: ts.size], ethernet=True))
    assert len(tr) == len(ts) == rep.n_events
    assert np.all(tr.t > 0)


def test_input_errors():
    with pytest.raises(BmmppError) as exc:
        RawPacketTrace([0.2, 0.1], [64, 64])
    assert exc.value.stage == "ingest"
    with pytest.raises(BmmppError):
        RawPacketTrace([0.1], [40], ethernet=True)
    with pytest.raises(BmmppError):
        RawPacketTrace([0.1, 0.2], [64])
    raw = RawPacketTrace([0.1], [64])
    with pytest.raises(BmmppError):
        aggregate_format1(raw, 0.0)
    with pytest.raises(BmmppError):
        aggregate_format1(RawPacketTrace([], []))


@pytest.mark.parametrize("text", [
    "0.1,64\n0.2,1518\n",
    "timestamp,size\n0.1,64\n0.2,1518\n",
    "# capture\n0.1 64\n0.2   1518\n",
])
def test_reader_formats(tmp_path, text):
    p = tmp_path / "raw.txt"
    p.write_text(text)
    raw = read_raw_trace(p, ethernet=True)
    np.testing.assert_allclose(raw.timestamps, [0.1, 0.2])
    np.testing.assert_array_equal(raw.sizes, [64, 1518])


def test_reader_errors(tmp_path):
    p = tmp_path / "raw.txt"
    p.write_text("# nothing\n")
    with pytest.raises(BmmppError):
        read_raw_trace(p)
    p.write_text("0.1\n0.2\n")
    with pytest.raises(BmmppError):
        read_raw_trace(p)


def test_write_read_round_trip(tmp_path):
    raw = synthetic_packet_trace(500, 1)
    p = tmp_path / "raw.txt"
    write_raw_trace(raw, p)
    back = read_raw_trace(p, ethernet=True)
    np.testing.assert_allclose(back.timestamps, raw.timestamps, atol=5e-7)
    np.testing.assert_array_equal(back.sizes, raw.sizes)


def test_synthetic_trace():
    raw = synthetic_packet_trace(20_000, 0)
    assert len(raw) == 20_000 and raw.ethernet
    assert np.all(np.diff(raw.timestamps) >= 0)
    tr, _ = aggregate_format2(raw)
    stats = summary_stats(tr)
    # a modulated stream is burstier than Poisson
    assert stats["cv"] > 1
    assert set(np.unique(tr.b)) == {1, 2}
    np.testing.assert_array_equal(synthetic_packet_trace(100, 0).sizes,
                                  synthetic_packet_trace(100, 0).sizes)
