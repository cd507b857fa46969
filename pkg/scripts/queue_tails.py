"""Queue-length tails at departures for the generator and fitted models.

Reads the models saved by ``em_comparison.py`` (run it first) and computes
P(L > i) at customer-level loads 0.3 and 0.7, plus batch-level 0.3 (batch
level 0.7 is unstable for this generator: customer load 1.148).
"""
from __future__ import annotations

import json

import numpy as np
from _common import parser, write_csv

from bmmpp import BmmppError, BmmppModel, QueueSpec, queue_length_at_departures

CASES = [("customer", 0.3), ("customer", 0.7), ("batch", 0.3), ("batch", 0.7)]


def main(argv=None):
    p = parser(__doc__)
    p.add_argument("--levels", type=int, default=60, help="tail points to write")
    args = p.parse_args(argv)
    src = args.outdir / "em_comparison_models.json"
    models = {k: BmmppModel.from_dict(d) for k, d in json.loads(src.read_text()).items()}
    for level, rho in CASES:
        cols = {}
        for name, m in models.items():
            try:
                qd = queue_length_at_departures(m, QueueSpec.for_load(m, rho, level=level))
            except BmmppError as exc:
                print(f"{level} rho={rho} {name}: {exc}")
                continue
            tail = np.zeros(args.levels)
            k = min(args.levels, qd.z.size)
            tail[:k] = qd.tail()[:k]
            cols[name] = tail
            print(f"{level} rho={rho} {name}: mean {qd.mean():.4f}, P(L>10) {tail[10]:.3e}")
        if cols:
            rows = [[i, *(c[i] for c in cols.values())] for i in range(args.levels)]
            write_csv(args.outdir / f"queue_tail_{level}_{rho:g}.csv", ["i", *cols], rows)


if __name__ == "__main__":
    main()
