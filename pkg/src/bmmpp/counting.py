"""Distribution and moments of the number of events in ``(0, t]``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from ._linalg import E, generator_expm, generator_stationary
from .errors import TruncationError
from .model import BmmppModel, check, size_k_mmpp


@dataclass
class CountDistribution:
    """``probs[n] = P(N(t) = n)`` for ``n = 0 ... n_max``."""

    t: float
    probs: np.ndarray
    truncation_mass: float
    n_max: int
    theta: float
    terms: int

    def mean(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)

    def var(self) -> float:
        n = np.arange(self.probs.size)
        m = n @ self.probs
        return float((n * n) @ self.probs - m * m)


def palm_mean(model: BmmppModel, t) -> np.ndarray | float:
    """Stationary mean count ``E[N(t)] = lambda* t`` with ``lambda* = pi D e``."""
    check(model)
    pi = generator_stationary(model.generator)
    lam = float(pi @ model.event_rates)
    return lam * np.asarray(t, dtype=float) if np.ndim(t) else lam * float(t)


def count_variance(model: BmmppModel, t):
    """Stationary ``V[N(t)]``.

    ``(1 + 2 l) l t - 2 pi D Z D e t - 2 pi D (I - exp(Q t)) Z^2 D e`` with
    ``Z = (e pi + Q)^{-1}`` and ``l = pi D e``.
    """
    check(model)
    model.require_irreducible()
    q = model.generator
    pi = generator_stationary(q)
    d = model.event_rates
    ep = np.outer(E, pi)
    try:
        z = np.linalg.inv(ep + q)
    except np.linalg.LinAlgError as exc:
        raise TruncationError("e pi + Q is singular", stage="counting") from exc
    lam = float(pi @ d)
    pid = pi * d  # pi D
    de = d  # D e
    lin = (1 + 2 * lam) * lam - 2 * float(pid @ z @ de)
    z2de = z @ z @ de
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    ex = generator_expm(q, ts)  # (n, 2, 2)
    trans = -2 * (float(pid @ z2de) - np.einsum("i,nij,j->n", pid, ex, z2de))
    out = lin * ts + trans
    return out if np.ndim(t) else float(out[0])


def count_distribution(model: BmmppModel, t: float, eps: float = 1e-10, start=None,
                       n_max: int | None = None, max_terms: int = 2_000_000) -> CountDistribution:
    """``p(n, t)`` by uniformization of the level-phase chain.

    With ``theta`` at least every phase's total exit rate ``-(D0)_ii``, the
    row vectors ``v_m(n) = start K_m(n)`` obey
    ``v_{m+1}(n) = v_m(n) (I + D0 / theta) + v_m(n - 1) D / theta`` and
    ``p(n, t) = sum_m Poisson(m; theta t) v_m(n) e``. The Poisson series is
    cut where its right tail drops below ``eps / 2``; ``n_max`` defaults to
    the mean plus ten standard deviations and is doubled until the
    neglected mass is below ``eps``.
    """
    check(model)
    if not t > 0:
        raise ValueError("t must be positive")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if start is None:
        start = generator_stationary(model.generator) if model.irreducible else np.array([0.5, 0.5])
    start = np.asarray(start, dtype=float)
    theta = 1.01 * float(np.max(-np.diag(model.d0)))
    if theta <= 0:
        probs = np.array([1.0])
        return CountDistribution(t, probs, 0.0, 0, 0.0, 1)
    lt = theta * t
    m_max = int(poisson.isf(eps / 2, lt)) + 1
    if m_max > max_terms:
        raise TruncationError(
            f"uniformization needs {m_max} terms (> {max_terms}); reduce t or raise eps",
            data={"terms": m_max, "theta": theta, "t": t},
        )
    weights = poisson.pmf(np.arange(m_max + 1), lt)
    if n_max is None:
        if model.irreducible:
            mean = float(palm_mean(model, t))
            sd = math.sqrt(max(count_variance(model, t), 0.0))
            n_max = int(math.ceil(mean + 10 * sd)) + 10
        else:
            n_max = m_max
    a = np.eye(2) + model.d0 / theta
    dvec = model.event_rates / theta  # D is diagonal
    while True:
        nm = min(n_max, m_max)
        v = np.zeros((nm + 1, 2))
        v[0] = start
        probs = weights[0] * v.sum(axis=1)
        for m in range(1, m_max + 1):
            nxt = v @ a
            nxt[1:] += v[:-1] * dvec
            v = nxt
            probs += weights[m] * v.sum(axis=1)
        mass = float(1.0 - probs.sum())
        if mass < eps or nm >= m_max:
            break
        n_max *= 2
    if mass >= eps:
        raise TruncationError("truncated mass exceeds eps", data={"mass": mass, "eps": eps})
    probs = np.maximum(probs, 0.0)
    return CountDistribution(float(t), probs, max(mass, 0.0), nm, theta, m_max + 1)


def count_distribution_size_k(model: BmmppModel, t: float, k: int, eps: float = 1e-10,
                              start=None, **kw) -> CountDistribution:
    """Distribution of the number of size-``k`` events in ``(0, t]``."""
    sub = size_k_mmpp(model, k).as_bmmpp()
    return count_distribution(sub, t, eps, start, **kw)


__all__ = [
    "CountDistribution", "palm_mean", "count_variance", "count_distribution",
    "count_distribution_size_k",
]
