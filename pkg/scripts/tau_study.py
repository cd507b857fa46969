"""Sensitivity of the sequential fit to the weight tau.

Fits the two simulated study traces (K=2, n=300 and K=4, n=1000) for
tau in {0.001, 0.01, 0.1, 1, 10, 100} and tabulates the fitted moments
next to the generator and empirical values, with the wall time per fit.
"""
from __future__ import annotations

from _common import parser, print_table, study_traces, write_csv

from bmmpp import FitConfig, fit, moment_set

TAUS = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0)


def names(K):
    out = ["mu1", "mu2", "mu3", "rhoT1"]
    for i in range(1, K):
        out += [f"beta1^({i})", f"eta^({i})"]
    return out


def main(argv=None):
    p = parser(__doc__)
    p.add_argument("--multistart", type=int, default=100)
    args = p.parse_args(argv)
    for name, gen, tr, K in study_traces(args.seed):
        cols = {"generator": moment_set(gen).as_array()}
        res = None
        times = {}
        for tau in TAUS:
            res = fit(tr, K, FitConfig(tau=tau, multistart=args.multistart))
            cols[f"tau={tau:g}"] = moment_set(res.model).as_array()
            times[f"tau={tau:g}"] = res.wall_time
        cols = {"generator": cols.pop("generator"),
                "empirical": res.empirical.moment_set().as_array(), **cols}
        header = ["moment", *cols]
        rows = [[n, *(c[j] for c in cols.values())] for j, n in enumerate(names(K))]
        rows.append(["time_s", "", "", *times.values()])
        print(f"\n{name}: n={len(tr)}, K={K}")
        print_table(header, rows)
        write_csv(args.outdir / f"tau_study_{name}.csv", header, rows)


if __name__ == "__main__":
    main()
