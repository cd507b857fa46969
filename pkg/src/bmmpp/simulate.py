"""Trace simulation and random model sampling."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from ._linalg import generator_stationary
from .descriptors import stationary_vectors
from .errors import BmmppError, DegenerateError
from .model import BmmppModel, validate


@dataclass(frozen=True)
class RngSpec:
    """Seed plus stream id of a counter-based (Philox) generator."""

    seed: int = 0
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream: int) -> "RngSpec":
        return RngSpec(self.seed, stream)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSpec):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngSpec(0 if rng is None else int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


@dataclass
class Trace:
    """Inter-event times ``t`` and batch sizes ``b`` of a marked point process."""

    t: np.ndarray
    b: np.ndarray
    origin: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).ravel()
        self.b = np.asarray(self.b).ravel()
        if self.b.size and not np.issubdtype(self.b.dtype, np.integer):
            bi = np.rint(self.b).astype(np.int64)
            if np.any(bi != self.b):
                raise BmmppError("batch sizes must be integers", stage="trace")
            self.b = bi
        self.b = self.b.astype(np.int64)
        if self.t.shape != self.b.shape:
            raise BmmppError("t and b lengths differ", stage="trace",
                             data={"len_t": self.t.size, "len_b": self.b.size})
        if np.any(~np.isfinite(self.t)) or np.any(self.t <= 0):
            raise BmmppError("inter-event times must be positive and finite", stage="trace",
                             data={"n_bad": int(np.sum(~(self.t > 0)))})
        if np.any(self.b < 1):
            raise BmmppError("batch sizes must be >= 1", stage="trace")

    def __len__(self):
        return self.t.size

    @property
    def K(self) -> int:
        return int(self.b.max()) if self.b.size else 0

    def write_csv(self, path):
        write_trace_csv(self, path)

    @classmethod
    def read_csv(cls, path) -> "Trace":
        return read_trace_csv(path)


def write_trace_csv(trace: Trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "b"])
        for ti, bi in zip(trace.t, trace.b):
            w.writerow([f"{ti:.12g}", int(bi)])


def read_trace_csv(path) -> Trace:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trace(data[:, 0], data[:, 1], origin={"source": str(Path(path))})


def _initial_state(model: BmmppModel, init, gen) -> int:
    if isinstance(init, (int, np.integer)):
        if init not in (0, 1):
            raise ValueError("initial state must be 0 or 1")
        return int(init)
    if init == "stationary-phi":
        p = stationary_vectors(model).phi if model.irreducible else _reducible_start(model)
    elif init == "stationary-pi":
        p = generator_stationary(model.generator) if model.irreducible else _reducible_start(model)
    else:
        raise ValueError(f"unknown init {init!r}")
    return int(gen.random() >= p[0])


def _reducible_start(model):
    # no switching possible from a phase with y = 0 (or r = 0); start where events happen
    rates = model.event_rates
    return np.array([1.0, 0.0]) if rates[0] > 0 else np.array([0.0, 1.0])


def simulate_trace(model: BmmppModel, n: int, rng=None,
                   init: Union[str, int] = "stationary-phi") -> Trace:
    """Simulate ``n`` consecutive events.

    The phase process is walked visit by visit: in phase ``i`` each jump
    takes ``Exp(lambda_i)`` and is a silent switch with probability
    ``switch_i / lambda_i``, so the number of events in one visit is
    geometric. Durations between consecutive emissions are summed per
    interval rather than differenced from a running clock.

    Parameters
    ----------
    model : BmmppModel
    n : int
        Number of events.
    rng : RngSpec, numpy Generator or int seed
    init : {"stationary-phi", "stationary-pi"} or 0/1
        Phase at time 0. The default is the stationary law at event epochs,
        which makes every interval of the trace stationary.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rates = model.event_rates
    if np.all(rates <= 0):
        raise DegenerateError("zero total event rate", stage="simulate")
    gen = as_generator(rng)
    lam = -np.diag(model.d0)
    switch = np.array([model.y, model.r])
    cum = np.cumsum(model.dk, axis=0)
    cum = cum / np.where(cum[-1] > 0, cum[-1], 1.0)
    state = _initial_state(model, init, gen)

    t_parts, b_parts = [], []
    pending = 0.0  # time since last emission carried across chunks
    got = 0
    while got < n:
        need = n - got
        # enough visits for roughly `need` events, by expected events per cycle
        per = np.where(switch > 0, rates / np.maximum(switch, 1e-300), np.inf)
        cyc = per.sum()
        nv = int(min(max(2 * need / max(cyc, 1e-12) + 8, 8), 4 * need + 8)) if np.isfinite(cyc) else 1
        states = (state + np.arange(nv)) % 2
        ps = switch[states] / lam[states]
        jumps = np.empty(nv, dtype=np.int64)
        absorbing = ps <= 0
        jumps[~absorbing] = gen.geometric(ps[~absorbing])
        if absorbing.any():
            # the walk never leaves this phase: cut the visit list there
            first = int(np.argmax(absorbing))
            jumps = jumps[: first + 1]
            states = states[: first + 1]
            jumps[first] = need + 1
            nv = first + 1
        jstate = np.repeat(states, jumps)
        dur = gen.standard_exponential(jstate.size) / lam[jstate]
        emit = np.ones(jstate.size, dtype=bool)
        ends = np.cumsum(jumps) - 1
        emit[ends] = False  # last jump of each visit is the silent switch
        if absorbing.any():
            emit[ends[-1]] = True
        idx = np.flatnonzero(emit)
        if idx.size == 0:
            pending += dur.sum()
            state = (states[-1] + 1) % 2
            continue
        take = min(idx.size, need)
        idx = idx[:take]
        starts = np.concatenate(([0], idx[:-1] + 1))
        t = np.add.reduceat(dur[: idx[-1] + 1], starts)
        t[0] += pending
        es = jstate[idx]
        u = gen.random(take)
        b = np.empty(take, dtype=np.int64)
        for s in (0, 1):
            m = es == s
            b[m] = np.searchsorted(cum[:, s], u[m], side="right") + 1
        np.minimum(b, model.K, out=b)
        t_parts.append(t)
        b_parts.append(b)
        got += take
        if got < n:
            # resume right after the last drawn jump
            pending = dur[idx[-1] + 1:].sum()
            state = (states[-1] + 1) % 2
    t = np.concatenate(t_parts)
    return Trace(t, np.concatenate(b_parts), origin={"model": model.to_dict()})


@dataclass(frozen=True)
class ModelBounds:
    """Uniform sampling ranges for :func:`sample_random_model`.

    ``switch`` bounds ``y`` and ``r``; ``emit`` bounds every ``w_k`` and
    ``q_k``. ``symmetric`` forces ``y = r``.
    """

    switch: tuple = (0.01, 10.0)
    emit: tuple = (0.0, 10.0)
    symmetric: bool = False


def sample_random_model(K: int, rng=None, bounds: ModelBounds = ModelBounds(),
                        max_tries: int = 1000) -> BmmppModel:
    """Draw a valid irreducible BMMPP_2(K) with rates uniform in ``bounds``.

    The diagonal of ``D0`` is set so that rows sum to zero, which is the
    rescaling that makes any nonnegative draw valid. Draws with no events
    at all are resampled.
    """
    gen = as_generator(rng)
    lo, hi = bounds.switch
    elo, ehi = bounds.emit
    if lo <= 0 or hi < lo or elo < 0 or ehi < elo:
        raise ValueError("bounds must give positive switch rates and nonnegative emission rates")
    for _ in range(max_tries):
        y, r = gen.uniform(lo, hi, 2)
        if bounds.symmetric:
            r = y
        dk = gen.uniform(elo, ehi, (K, 2))
        rates = dk.sum(axis=0)
        d0 = np.array([[-y - rates[0], y], [r, -r - rates[1]]])
        m = BmmppModel(d0, dk)
        if validate(m).ok and rates.sum() > 0:
            return m
    raise BmmppError("could not sample a valid model within the attempt budget", stage="simulate")


__all__ = [
    "RngSpec", "Trace", "simulate_trace", "ModelBounds", "sample_random_model",
    "write_trace_csv", "read_trace_csv", "as_generator",
]
