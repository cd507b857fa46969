"""Packet-trace study: aggregation, fitting and the queue at load 0.5.

With ``--raw`` pointing to a two-column (timestamp, size) capture such as
the public Bellcore Aug89 file, the capture is aggregated in both formats
(1 ms bins capped at 4 packets; small/large packets split at 100 bytes),
summarized, fitted (K=4 and K=2) and compared with reference values.
Without it a synthetic stand-in capture exercises the same pipeline, and the
reference empirical moments are fitted directly for the comparison.
The queue-length tail of the format-I model at customer load 0.5 is written
as well.
"""
from __future__ import annotations

import numpy as np
from _common import parser, write_csv

from bmmpp import (
    BmmppError, EmpiricalMoments, FitConfig, QueueSpec, RngSpec, aggregate_format1,
    aggregate_format2, describe, empirical_descriptors, fit, fit_moments,
    queue_length_at_departures, read_raw_trace, summary_stats, synthetic_packet_trace,
)

REFERENCE_EMP = {
    1: EmpiricalMoments(3.5625e-3, 4.7465e-5, 2.2802e-6, 0.1908, (1.1241, 1.8849, 1.9915),
                        (3.8663e-3, 6.8387e-3, 7.1082e-3)),
    2: EmpiricalMoments(3.1428e-3, 4.1718e-5, 2.0104e-6, 0.2, (1.8121,), (5.4932e-3,)),
}
REFERENCE_EST = {
    1: {"cv": 1.6553, "skewness": 11.1199, "kurtosis": 168.1339, "beta_1": 1.1162,
        "beta_2": 1.3618, "corrTB": -0.0180, "rhoB_1": 6.1083e-3, "rhoT_2": 0.1146,
        "rhoT_3": 0.0689, "pmfB_1": 0.8904, "pmfB_2": 0.1031, "pmfB_3": 0.0065,
        "pmfB_4": 1.7143e-5},
    2: {"cv": 1.7954, "skewness": 11.1896, "kurtosis": 166.8824, "beta_1": 1.8121,
        "beta_2": 3.4363, "corrTB": -0.0916, "rhoB_1": 0.1141, "rhoT_2": 0.1160,
        "rhoT_3": 0.0673, "pmfB_1": 0.1879, "pmfB_2": 0.8121},
}
K_OF = {1: 4, 2: 2}


def queue_tail(model, rho, levels):
    try:
        qd = queue_length_at_departures(model, QueueSpec.for_load(model, rho, level="customer"))
    except BmmppError as exc:
        print(f"queue at customer load {rho}: {exc}")
        return None
    tail = np.zeros(levels)
    k = min(levels, qd.z.size)
    tail[:k] = qd.tail()[:k]
    return tail


def main(argv=None):
    p = parser(__doc__)
    p.add_argument("--raw", help="two-column capture file (timestamp, size in bytes)")
    p.add_argument("--packets", type=int, default=200_000, help="synthetic capture size")
    p.add_argument("--levels", type=int, default=60)
    args = p.parse_args(argv)
    if args.raw:
        raw = read_raw_trace(args.raw, ethernet=True)
    else:
        raw = synthetic_packet_trace(args.packets, RngSpec(args.seed))
        print(f"no --raw capture: synthetic stand-in with {len(raw)} packets")
    traces = {1: aggregate_format1(raw, 1e-3, 4), 2: aggregate_format2(raw, 100)}
    tails = {}
    for fmt, (tr, rep) in traces.items():
        K = K_OF[fmt]
        s = summary_stats(tr)
        print(f"\nformat {fmt}: {rep.n_events} events, {rep.rejected_events} bins rejected, "
              f"{rep.floored_gaps} zero gaps floored")
        print("  " + ", ".join(f"{k} {v:.4g}" for k, v in s.items()))
        res = fit(tr, K, FitConfig())
        emp, est = empirical_descriptors(tr, K).flat(), describe(res.model).flat()
        rows = [[k, emp[k], est[k]] for k in est if k in emp]
        header = ["descriptor", "empirical", "fitted"]
        if not args.raw:
            # reference empirical moments fitted directly, next to the reference fit
            pub = describe(fit_moments(REFERENCE_EMP[fmt], K, FitConfig()).model).flat()
            header += ["fit_reference_moments", "reference_fit"]
            rows = [r + [pub[r[0]], REFERENCE_EST[fmt].get(r[0], float("nan"))] for r in rows]
            if fmt == 1:
                tails["reference_moments_fit"] = queue_tail(
                    fit_moments(REFERENCE_EMP[1], 4, FitConfig()).model, 0.5, args.levels)
        else:
            header += ["reference_fit"]
            rows = [r + [REFERENCE_EST[fmt].get(r[0], float("nan"))] for r in rows]
        write_csv(args.outdir / f"packet_format{fmt}_descriptors.csv", header, rows)
        if fmt == 1:
            tails["format1_fit"] = queue_tail(res.model, 0.5, args.levels)
    cols = {k: v for k, v in tails.items() if v is not None}
    if cols:
        rows = [[i, *(c[i] for c in cols.values())] for i in range(args.levels)]
        write_csv(args.outdir / "packet_queue_tail_0.5.csv", ["i", *cols], rows)


if __name__ == "__main__":
    main()
