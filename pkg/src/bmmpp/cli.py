"""Command-line interface: ``bmmpp <subcommand> ...``.

Every subcommand writes CSV or JSON to ``--out``, to ``$BMMPP_OUTDIR`` when
that is set (one file per subcommand), or to stdout. Failures print a JSON
envelope ``{"stage", "message", "data"}`` on stderr and exit with status 2.
``--config file.json`` supplies defaults for any flag (keys use the flag's
destination name, e.g. ``multistart``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .counting import count_distribution, count_distribution_size_k
from .descriptors import describe, moment_set
from .errors import BmmppError
from .fit import FitConfig, compare_reports, empirical_descriptors, fit
from .likelihood import em_fit, loglik
from .model import BmmppModel, save_model
from .queue import QueueSpec, queue_length_at_departures, simulate_queue, traffic_intensity
from .simulate import ModelBounds, RngSpec, read_trace_csv, sample_random_model, simulate_trace
from .traceio import aggregate_format1, aggregate_format2, read_raw_trace, summary_stats

OUTDIR_ENV = "BMMPP_OUTDIR"
EXT = {"simulate": "csv", "describe": "csv", "fit": "json", "loglik": "json", "count": "csv",
       "queue": "csv", "ingest": "csv", "sample-scatter": "csv"}


@dataclass
class RunConfig:
    """Resolved command line: the subcommand plus its flags."""

    subcommand: str
    out: str | None = None
    options: dict = field(default_factory=dict)

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        opts = {k: v for k, v in vars(ns).items() if k not in ("subcommand", "out", "func", "config")}
        return cls(ns.subcommand, ns.out, opts)


def _load_model(path) -> BmmppModel:
    """Model JSON, or a fit result JSON holding one under ``model``."""
    with open(path) as fh:
        d = json.load(fh)
    return BmmppModel.from_dict(d["model"] if "d0" not in d and "model" in d else d)


def _emit(cfg: RunConfig, text: str):
    target = cfg.out
    if target is None and os.environ.get(OUTDIR_ENV):
        outdir = Path(os.environ[OUTDIR_ENV])
        outdir.mkdir(parents=True, exist_ok=True)
        target = str(outdir / f"{cfg.subcommand}.{EXT[cfg.subcommand]}")
    if target is None or target == "-":
        sys.stdout.write(text)
    else:
        Path(target).write_text(text)
        print(target, file=sys.stderr)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, default=float) + "\n"


def cmd_simulate(cfg: RunConfig):
    o = cfg.options
    tr = simulate_trace(_load_model(o["model"]), o["n"], RngSpec(o["seed"], o["stream"]), o["init"])
    _emit(cfg, _csv(["t", "b"], ((f"{t:.12g}", int(b)) for t, b in zip(tr.t, tr.b))))


def cmd_describe(cfg: RunConfig):
    o = cfg.options
    if not (o["model"] or o["trace"]):
        raise BmmppError("describe needs --model and/or --trace", stage="cli")
    rep_m = describe(_load_model(o["model"]), o["lags"]) if o["model"] else None
    rep_t = None
    if o["trace"]:
        tr = read_trace_csv(o["trace"])
        K = o["K"] or (rep_m and len(rep_m.pmfB)) or tr.K
        rep_t = empirical_descriptors(tr, K, o["lags"])
    if rep_m and rep_t:
        rows = compare_reports(rep_t, rep_m)
        _emit(cfg, _csv(["descriptor", "empirical", "fitted", "rel_diff"], rows))
    else:
        rep = rep_m or rep_t
        _emit(cfg, _csv(["descriptor", "value"], rep.flat().items()))


def cmd_fit(cfg: RunConfig):
    o = cfg.options
    tr = read_trace_csv(o["trace"])
    if o["method"] == "em":
        if not o["init"]:
            raise BmmppError("--method em needs --init model.json", stage="cli")
        res = em_fit(tr, o["K"], _load_model(o["init"]), max_iter=o["max_iter"], tol=o["em_tol"])
    else:
        fc = FitConfig(tau=o["tau"], multistart=o["multistart"], rng=RngSpec(o["seed"]),
                       variant=o["variant"])
        res = fit(tr, o["K"], fc)
    out = res.to_dict()
    out["loglik"] = loglik(res.model, tr).loglik
    out["moments"] = moment_set(res.model).as_array().tolist()
    if o["model_out"]:
        save_model(res.model, o["model_out"])
    _emit(cfg, _json(out))


def cmd_loglik(cfg: RunConfig):
    o = cfg.options
    tr = read_trace_csv(o["trace"])
    v = loglik(_load_model(o["model"]), tr)
    _emit(cfg, _json({"loglik": v.loglik, "n": v.n}))


def cmd_count(cfg: RunConfig):
    o = cfg.options
    m = _load_model(o["model"])
    if o["size"]:
        d = count_distribution_size_k(m, o["t"], o["size"], eps=o["eps"])
    else:
        d = count_distribution(m, o["t"], eps=o["eps"])
    print(json.dumps({"t": d.t, "truncation_mass": d.truncation_mass, "theta": d.theta,
                      "terms": d.terms}), file=sys.stderr)
    _emit(cfg, _csv(["n", "p"], enumerate(d.probs)))


def cmd_queue(cfg: RunConfig):
    o = cfg.options
    m = _load_model(o["model"])
    if o["mu"]:
        spec = QueueSpec(o["mu"], eps=o["eps"])
    elif o["rho"]:
        spec = QueueSpec.for_load(m, o["rho"], o["level"], eps=o["eps"])
    else:
        raise BmmppError("queue needs --rho or --mu", stage="cli")
    d = queue_length_at_departures(m, spec)
    rb, rc = traffic_intensity(m, spec)
    print(json.dumps({"mu": spec.mu, "rho_batch": rb, "rho_customer": rc,
                      "tail_mass": d.tail_mass}), file=sys.stderr)
    cols, rows = ["i", "z", "tail"], [list(r) for r in zip(range(d.z.size), d.z, d.tail())]
    if o["simulate"]:
        s = simulate_queue(m, spec, o["simulate"], RngSpec(o["seed"]))
        cols += ["z_sim", "se_sim"]
        for i, row in enumerate(rows):
            row += [s.z[i], s.se[i]] if i < s.z.size else [0.0, 0.0]
    _emit(cfg, _csv(cols, rows))


def cmd_ingest(cfg: RunConfig):
    o = cfg.options
    raw = read_raw_trace(o["input"], ethernet=o["ethernet"])
    if o["format"] == 1:
        tr, rep = aggregate_format1(raw, o["bin"], o["cap"])
    else:
        tr, rep = aggregate_format2(raw, o["threshold"])
    print(json.dumps({"report": vars(rep), "summary": summary_stats(tr)}, default=float),
          file=sys.stderr)
    _emit(cfg, _csv(["t", "b"], ((f"{t:.12g}", int(b)) for t, b in zip(tr.t, tr.b))))


def cmd_sample_scatter(cfg: RunConfig):
    """``(cv, rho_T(1))`` of randomly drawn processes."""
    o = cfg.options
    gen = RngSpec(o["seed"]).generator()
    bounds = ModelBounds(tuple(o["switch"]), tuple(o["emit"]))
    rows = []
    for _ in range(o["count"]):
        rep = describe(sample_random_model(o["K"], gen, bounds), lags=1, moments=1)
        rows.append((rep.cv, rep.rhoT[1]))
    _emit(cfg, _csv(["cv", "rhoT1"], rows))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bmmpp", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file with default flag values")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--out", help="output path ('-' for stdout)")
        sp.set_defaults(func=func)
        return sp

    sp = add("simulate", cmd_simulate, "simulate a trace from a model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--stream", type=int, default=0)
    sp.add_argument("--init", default="stationary-phi", choices=["stationary-phi", "stationary-pi"])

    sp = add("describe", cmd_describe, "descriptors of a model, a trace, or both side by side")
    sp.add_argument("--model")
    sp.add_argument("--trace")
    sp.add_argument("--K", type=int)
    sp.add_argument("--lags", type=int, default=3)

    sp = add("fit", cmd_fit, "fit a model to a trace")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--K", type=int)
    sp.add_argument("--method", default="moments", choices=["moments", "em"])
    sp.add_argument("--tau", type=float, default=1e-3)
    sp.add_argument("--multistart", type=int, default=100)
    sp.add_argument("--variant", default="general", choices=["general", "iid-batch"])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--init", help="initial model for EM")
    sp.add_argument("--max-iter", type=int, default=1000)
    sp.add_argument("--em-tol", type=float, default=1e-6)
    sp.add_argument("--model-out", help="also write the fitted model JSON here")

    sp = add("loglik", cmd_loglik, "log-likelihood of a trace under a model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--trace", required=True)

    sp = add("count", cmd_count, "distribution of the number of events in (0, t]")
    sp.add_argument("--model", required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--eps", type=float, default=1e-10)
    sp.add_argument("--size", type=int, help="count only events of this batch size")

    sp = add("queue", cmd_queue, "queue length at departures of the BMMPP/M/1 queue")
    sp.add_argument("--model", required=True)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--level", default="batch", choices=["batch", "customer"])
    sp.add_argument("--mu", type=float, help="service rate (overrides --rho)")
    sp.add_argument("--eps", type=float, default=1e-10)
    sp.add_argument("--simulate", type=int, default=0, help="also simulate this many departures")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("ingest", cmd_ingest, "aggregate a packet trace into a batch trace")
    sp.add_argument("--input", required=True)
    sp.add_argument("--format", type=int, default=1, choices=[1, 2])
    sp.add_argument("--bin", type=float, default=1e-3)
    sp.add_argument("--cap", type=int, default=4)
    sp.add_argument("--threshold", type=int, default=100)
    sp.add_argument("--ethernet", action="store_true", help="enforce 64..1518 byte sizes")

    sp = add("sample-scatter", cmd_sample_scatter, "(cv, rho_T(1)) of random processes")
    sp.add_argument("--count", type=int, default=100_000)
    sp.add_argument("--K", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--switch", type=float, nargs=2, default=[0.01, 10.0])
    sp.add_argument("--emit", type=float, nargs=2, default=[0.0, 10.0])
    return p


def _apply_config(parser: argparse.ArgumentParser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    with open(known.config) as fh:
        defaults = json.load(fh)
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        ns = parser.parse_args(argv)
        ns.func(RunConfig.from_namespace(ns))
    except BmmppError as exc:
        print(json.dumps(exc.envelope(), default=str), file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps({"stage": "cli", "message": str(exc),
                          "data": {"type": type(exc).__name__}}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
