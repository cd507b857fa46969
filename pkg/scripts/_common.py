"""Small helpers shared by the experiment scripts."""
from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

from bmmpp import EXAMPLE_K2, EXAMPLE_K4, RngSpec, simulate_trace

RESULTS = Path(__file__).resolve().parent.parent / "results"


def parser(doc: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=doc.strip().splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", type=Path, default=RESULTS)
    return p


def study_traces(seed: int = 0):
    """The two simulated study traces: (name, generator, trace, K)."""
    return [
        ("k2", EXAMPLE_K2, simulate_trace(EXAMPLE_K2, 300, RngSpec(seed)), 2),
        ("k4", EXAMPLE_K4, simulate_trace(EXAMPLE_K4, 1000, RngSpec(seed)), 4),
    ]


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.6g}" if isinstance(v, (float, np.floating)) else v for v in row])
    print(f"wrote {path}")


def print_table(header, rows, width=12):
    print("".join(f"{h:>{width}}" for h in header))
    for row in rows:
        print("".join(f"{v:>{width}.5g}" if isinstance(v, (float, np.floating)) else f"{v:>{width}}"
                      for v in row))
