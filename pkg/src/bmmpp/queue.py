"""Queue length at departures in a single-server queue with BMMPP_2(K) input.

Customers of a batch arrive together; service times are exponential with
rate ``mu``. The departure-epoch chain ``(queue length, phase)`` is of
M/G/1 type with blocks ``A_n`` (``n`` arrivals during one service that
starts with a nonempty queue) and ``B_n`` (service started by the arrival of
the batch that ends an idle period).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .descriptors import batch_moments, time_moments
from .errors import ConvergenceError, UnstableQueueError
from .model import BmmppModel, check
from .simulate import as_generator, simulate_trace
from ._linalg import stochastic_stationary


@dataclass(frozen=True)
class QueueSpec:
    mu: float
    eps: float = 1e-10
    tol: float = 1e-14
    max_iter: int = 100_000
    block_tol: float = 1e-14

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("service rate must be positive")
        for name in ("eps", "tol"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")

    @classmethod
    def for_load(cls, model: BmmppModel, rho: float, level: str = "batch", **kw) -> "QueueSpec":
        """Service rate giving batch-level (or customer-level) intensity ``rho``."""
        lam = 1.0 / time_moments(model, 1)
        if level == "customer":
            lam *= batch_moments(model, 1)
        elif level != "batch":
            raise ValueError("level must be 'batch' or 'customer'")
        return cls(lam / rho, **kw)


@dataclass
class QueueLengthDist:
    z: np.ndarray
    tail_mass: float
    se: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def tail(self) -> np.ndarray:
        """``P(L > i)`` for each ``i``."""
        return np.clip(1.0 - np.cumsum(self.z), 0.0, None)

    def mean(self) -> float:
        return float(np.arange(self.z.size) @ self.z)


def traffic_intensity(model: BmmppModel, spec: QueueSpec) -> tuple:
    """``(rho_batch, rho_customer)``: batch rate and customer rate over ``mu``."""
    lam = 1.0 / time_moments(model, 1)
    rb = lam / spec.mu
    return rb, rb * batch_moments(model, 1)


def _blocks(model: BmmppModel, spec: QueueSpec):
    mu = spec.mu
    inv = np.linalg.inv(mu * np.eye(2) - model.d0)
    A = [mu * inv]
    dk = [np.diag(row) for row in model.dk]
    # the row sums of sum_n A_n equal 1; stop once the remainder is negligible
    # (rounding keeps the sum a few ulps short, so also stop once the last K
    # blocks vanish; single zero blocks occur when some batch sizes are absent)
    while (1.0 - np.sum(A, axis=0).sum(axis=1).min() > spec.block_tol
           and max(a.max() for a in A[-model.K:]) > 1e-30):
        n = len(A)
        acc = sum(A[n - k] @ dk[k - 1] for k in range(1, min(n, model.K) + 1))
        A.append(acc @ inv)
        if n > 1_000_000:
            raise ConvergenceError("A-block series does not terminate", stage="queue")
    A = np.array(A)
    m0 = np.linalg.inv(-model.d0)
    pre = [m0 @ d for d in dk]  # phase at the arrival that ends an idle period, batch k
    nb = A.shape[0]
    B = np.zeros_like(A)
    for n in range(nb):
        for k in range(1, min(n + 1, model.K) + 1):
            B[n] += pre[k - 1] @ A[n + 1 - k]
    return A, B


def _solve_g(A, spec: QueueSpec):
    eye = np.eye(2)
    g = np.zeros((2, 2))
    for it in range(spec.max_iter):
        # G = (I - sum_{n>=1} A_n G^{n-1})^{-1} A_0
        s = A[-1]
        for n in range(A.shape[0] - 2, 0, -1):
            s = A[n] + s @ g
        new = np.linalg.solve(eye - s, A[0])
        if np.abs(new - g).max() < spec.tol:
            return new, it + 1
        g = new
    raise ConvergenceError("G iteration did not converge", stage="queue",
                           data={"iterations": spec.max_iter})


def _bar(M, g):
    """``out[i] = sum_{n >= i} M_n G^{n-i}``."""
    out = np.zeros_like(M)
    acc = np.zeros((2, 2))
    for i in range(M.shape[0] - 1, -1, -1):
        acc = M[i] + acc @ g
        out[i] = acc
    return out


def queue_length_at_departures(model: BmmppModel, spec: QueueSpec) -> QueueLengthDist:
    """Stationary queue length just after a departure.

    ``G`` from its fixed-point equation, the level-0 vector from the
    stationary law of ``sum_n B_n G^n``, then the stable recursion
    ``x_i = (x_0 Bbar_i + sum_{j=1}^{i-1} x_j Abar_{i+1-j}) (I - Abar_1)^{-1}``.
    Terms are emitted until the remaining mass is at most ``spec.eps``.
    """
    check(model)
    rb, rc = traffic_intensity(model, spec)
    if rc >= 1:
        raise UnstableQueueError("customer-level traffic intensity >= 1",
                                 data={"rho_batch": rb, "rho_customer": rc})
    A, B = _blocks(model, spec)
    g, iters = _solve_g(A, spec)
    abar, bbar = _bar(A, g), _bar(B, g)
    kappa = stochastic_stationary(bbar[0])
    eye = np.eye(2)
    # total mass above level 0 in terms of x0, to normalize up front
    asum = abar[1:].sum(axis=0)
    bsum = bbar[1:].sum(axis=0)
    s_vec = kappa @ bsum @ np.linalg.inv(eye - asum)
    x0 = kappa / (1.0 + s_vec.sum())
    inv1 = np.linalg.inv(eye - abar[1])
    nb = A.shape[0]
    xs = [x0]
    total = x0.sum()
    i = 1
    while 1.0 - total > spec.eps:
        acc = x0 @ bbar[i] if i < nb else np.zeros(2)
        for j in range(max(1, i + 1 - (nb - 1)), i):
            acc = acc + xs[j] @ abar[i + 1 - j]
        xi = np.maximum(acc @ inv1, 0.0)
        xs.append(xi)
        total += xi.sum()
        i += 1
        if i > 10_000_000:
            raise ConvergenceError("queue-length tail does not decay", stage="queue")
    z = np.array([x.sum() for x in xs])
    return QueueLengthDist(z, float(max(1.0 - z.sum(), 0.0)), None,
                           {"rho_batch": rb, "rho_customer": rc, "g_iterations": iters,
                            "g_row_sums": g.sum(axis=1).tolist(), "blocks": int(nb)})


def simulate_queue(model: BmmppModel, spec: QueueSpec, n_departures: int, rng=None,
                   warmup: float = 0.05, n_batches: int = 50) -> QueueLengthDist:
    """Discrete-event check of :func:`queue_length_at_departures`.

    FIFO departures follow ``D_c = C_c + max_{j <= c}(a_j - C_{j-1})`` with
    ``C`` the cumulative service times; the queue left behind by departure
    ``c`` is the number of arrivals up to ``D_c`` minus ``c``. Standard
    errors come from ``n_batches`` batch means after discarding the warmup.
    """
    check(model)
    _, rc = traffic_intensity(model, spec)
    if rc >= 1:
        raise UnstableQueueError("customer-level traffic intensity >= 1", data={"rho_customer": rc})
    gen = as_generator(rng)
    n_total = int(n_departures / (1 - warmup)) + 1
    beta1 = batch_moments(model, 1)
    n_events = int(n_total / beta1 * 1.1) + 1000
    serv = gen.standard_exponential(n_total) / spec.mu
    c = np.cumsum(serv)
    cprev = np.concatenate(([0.0], c[:-1]))
    while True:
        tr = simulate_trace(model, n_events, gen)
        every = np.repeat(np.cumsum(tr.t), tr.b)
        if every.size > n_total:
            dep = c + np.maximum.accumulate(every[:n_total] - cprev)
            # arrivals must cover the last departure for the counts to be exact
            if every[-1] > dep[-1]:
                break
        n_events *= 2
    arrived = np.searchsorted(every, dep, side="right")
    qlen = arrived - np.arange(1, n_total + 1)
    q = qlen[n_total - n_departures:]
    top = int(q.max()) + 1
    z = np.bincount(q, minlength=top) / q.size
    chunks = np.array_split(q, n_batches)
    freq = np.array([np.bincount(ch, minlength=top)[:top] / ch.size for ch in chunks])
    se = freq.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return QueueLengthDist(z, 0.0, se, {"n_departures": int(q.size), "rho_customer": rc})


__all__ = [
    "QueueSpec", "QueueLengthDist", "traffic_intensity", "queue_length_at_departures",
    "simulate_queue",
]
