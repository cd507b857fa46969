"""Coefficient of variation against lag-1 autocorrelation of random MMPP_2s.

Draws random processes (switching rates in (0.01, 10), event rates in
(0, 10)), writes (cv, rho_T(1)) pairs and prints the smallest cv seen in
bands of rho_T(1).
"""
from __future__ import annotations

import numpy as np
from _common import parser, write_csv

from bmmpp import ModelBounds, RngSpec, describe, sample_random_model


def main(argv=None):
    p = parser(__doc__)
    p.add_argument("--count", type=int, default=100_000)
    p.add_argument("--K", type=int, default=1)
    args = p.parse_args(argv)
    gen = RngSpec(args.seed).generator()
    bounds = ModelBounds((0.01, 10.0), (0.0, 10.0))
    pts = np.empty((args.count, 2))
    for i in range(args.count):
        rep = describe(sample_random_model(args.K, gen, bounds), lags=1, moments=1)
        pts[i] = rep.cv, rep.rhoT[1]
    write_csv(args.outdir / "rho_cv_scatter.csv", ["cv", "rhoT1"], pts.tolist())
    edges = np.linspace(0.0, 0.5, 11)
    print(f"{'rhoT1 band':>16}{'count':>8}{'min cv':>10}{'median cv':>11}")
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (pts[:, 1] >= lo) & (pts[:, 1] < hi)
        if sel.any():
            print(f"{lo:7.2f}-{hi:<8.2f}{sel.sum():>8}{pts[sel, 0].min():>10.3f}"
                  f"{np.median(pts[sel, 0]):>11.3f}")


if __name__ == "__main__":
    main()
