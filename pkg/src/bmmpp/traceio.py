"""Packet-trace ingestion and aggregation into batch traces.

Two aggregations are provided. Format I groups packets observed in the same
time bin into one event whose batch size is the packet count. Format II keeps
every packet as an event and labels it by size class (1 small, 2 large).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BmmppError
from .simulate import Trace, as_generator, read_trace_csv, write_trace_csv

ETHERNET_BOUNDS = (64, 1518)
RESOLUTION = 1e-6


@dataclass
class RawPacketTrace:
    """Packet arrival times (seconds) and sizes (bytes)."""

    timestamps: np.ndarray
    sizes: np.ndarray
    ethernet: bool = False

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float).ravel()
        self.sizes = np.asarray(self.sizes, dtype=np.int64).ravel()
        if self.timestamps.shape != self.sizes.shape:
            raise BmmppError("timestamps and sizes lengths differ", stage="ingest")
        if not np.all(np.isfinite(self.timestamps)):
            raise BmmppError("timestamps must be finite", stage="ingest")
        bad = np.flatnonzero(np.diff(self.timestamps) < 0)
        if bad.size:
            raise BmmppError("timestamps are not sorted", stage="ingest",
                             data={"first_index": int(bad[0] + 1), "n_unsorted": int(bad.size)})
        if self.ethernet:
            lo, hi = ETHERNET_BOUNDS
            out = int(np.sum((self.sizes < lo) | (self.sizes > hi)))
            if out:
                raise BmmppError("packet sizes outside Ethernet bounds", stage="ingest",
                                 data={"n_out_of_bounds": out, "bounds": list(ETHERNET_BOUNDS)})

    def __len__(self):
        return self.timestamps.size


def read_raw_trace(path, ethernet: bool = False) -> RawPacketTrace:
    """Read a two-column (timestamp, size) file, comma or whitespace separated.

    Lines starting with ``#`` and a non-numeric header line are skipped.
    """
    path = Path(path)
    with path.open() as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise BmmppError("empty packet trace", stage="ingest", data={"path": str(path)})
    delim = "," if "," in lines[0] else None
    try:
        float(lines[0].split(delim)[0])
    except ValueError:
        lines = lines[1:]
    data = np.loadtxt(lines, delimiter=delim, ndmin=2)
    if data.shape[1] < 2:
        raise BmmppError("expected two columns (timestamp, size)", stage="ingest",
                         data={"path": str(path), "columns": int(data.shape[1])})
    return RawPacketTrace(data[:, 0], data[:, 1], ethernet)


def write_raw_trace(raw: RawPacketTrace, path):
    np.savetxt(path, np.column_stack([raw.timestamps, raw.sizes]),
               fmt=["%.6f", "%d"], header="timestamp size", comments="# ")


@dataclass
class AggregationReport:
    n_packets: int
    n_events: int
    rejected_events: int = 0
    rejected_packets: int = 0
    floored_gaps: int = 0
    extra: dict = field(default_factory=dict)


def aggregate_format1(raw: RawPacketTrace, bin: float = 1e-3, cap: int = 4) -> tuple:
    """Bin packets on a ``bin``-wide grid; each occupied bin is one event.

    Bins are ``floor(t / bin)``. Inter-event times are differences of the
    occupied bin times; the first one is measured from time zero and is at
    least one bin. Bins holding more than ``cap`` packets are dropped (their
    time is merged into the next gap) and counted in the report.

    Returns
    -------
    (Trace, AggregationReport)
    """
    if not bin > 0:
        raise BmmppError("bin width must be positive", stage="ingest", data={"bin": bin})
    if len(raw) == 0:
        raise BmmppError("empty packet trace", stage="ingest")
    # a small nudge keeps exact multiples of bin on their own grid point
    idx = np.floor(raw.timestamps / bin + 1e-9).astype(np.int64)
    bins, counts = np.unique(idx, return_counts=True)
    keep = counts <= cap
    report = AggregationReport(len(raw), int(keep.sum()), int((~keep).sum()),
                               int(counts[~keep].sum()), extra={"bin": bin, "cap": cap})
    bins, counts = bins[keep], counts[keep]
    gaps = np.diff(np.concatenate(([0], bins)))
    gaps[0] = max(gaps[0], 1)
    trace = Trace(gaps * bin, counts, origin={"format": 1, "bin": bin, "cap": cap})
    return trace, report


def aggregate_format2(raw: RawPacketTrace, threshold: int = 100) -> tuple:
    """One event per packet, labelled 1 if ``size < threshold`` else 2.

    Inter-event times are timestamp differences (the first from time zero);
    zero gaps are floored to the clock resolution and counted in the report.

    Returns
    -------
    (Trace, AggregationReport)
    """
    if len(raw) == 0:
        raise BmmppError("empty packet trace", stage="ingest")
    t = np.diff(np.concatenate(([0.0], raw.timestamps)))
    zero = t < RESOLUTION / 2
    t[zero] = RESOLUTION
    labels = np.where(raw.sizes < threshold, 1, 2)
    report = AggregationReport(len(raw), len(raw), floored_gaps=int(zero.sum()),
                               extra={"threshold": threshold})
    return Trace(t, labels, origin={"format": 2, "threshold": threshold}), report


def summary_stats(trace: Trace) -> dict:
    """Mean, median, coefficient of variation, min and max of inter-event times."""
    t = trace.t
    return {
        "n": int(t.size), "mean": float(t.mean()), "median": float(np.median(t)),
        "cv": float(t.std() / t.mean()), "min": float(t.min()), "max": float(t.max()),
    }


def synthetic_packet_trace(n: int = 200_000, rng=None, rates=(120.0, 600.0),
                           switch=(2.0, 6.0), small_prob=(0.5, 0.25)) -> RawPacketTrace:
    """Stand-in for a real Ethernet capture.

    Packets follow a two-phase MMPP (per-phase packet ``rates``, phase
    leaving rates ``switch``); sizes are uniform on 64..99 bytes with the
    per-phase ``small_prob`` and on 100..1518 bytes otherwise. Timestamps are
    rounded to microseconds.
    """
    gen = as_generator(rng)
    rates, switch, small_prob = map(np.asarray, (rates, switch, small_prob))
    ts = np.empty(n)
    sizes = np.empty(n, dtype=np.int64)
    state, now, filled = 0, 0.0, 0
    while filled < n:
        dwell = gen.exponential(1.0 / switch[state])
        m = gen.poisson(rates[state] * dwell)
        if m:
            m = min(m, n - filled)
            pts = now + np.sort(gen.uniform(0.0, dwell, m))
            small = gen.random(m) < small_prob[state]
            sz = np.where(small, gen.integers(64, 100, m), gen.integers(100, 1519, m))
            ts[filled:filled + m] = pts
            sizes[filled:filled + m] = sz
            filled += m
        now += dwell
        state = 1 - state
    return RawPacketTrace(np.round(ts, 6), sizes, ethernet=True)


__all__ = [
    "RawPacketTrace", "AggregationReport", "read_raw_trace", "write_raw_trace",
    "aggregate_format1", "aggregate_format2", "summary_stats", "synthetic_packet_trace",
    "Trace", "read_trace_csv", "write_trace_csv",
]
