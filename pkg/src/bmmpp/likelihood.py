"""Trace likelihood and an EM baseline for BMMPP_2(K)."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ._linalg import expm2
from .descriptors import stationary_vectors
from .errors import BmmppError, ConvergenceError
from .fit import FitResult, StageInfo, empirical_moments
from .model import BmmppModel, check, normalize_state_order
from .simulate import Trace


@dataclass
class LikelihoodValue:
    loglik: float
    n: int
    log_scales: np.ndarray

    def __float__(self):
        return float(self.loglik)


def _check_trace(model: BmmppModel, trace: Trace):
    if trace.K > model.K:
        raise BmmppError(f"trace has batch size {trace.K} > K={model.K}", stage="likelihood")
    if np.any(trace.t <= 0):
        raise BmmppError("inter-event times must be positive", stage="likelihood")


def _step_matrices(model: BmmppModel, t, b):
    """``exp(D0 t_i) D_{b_i}`` for every event, shape ``(n, 2, 2)``."""
    e = expm2(model.d0, t)
    return e * model.dk[b - 1][:, None, :]


def _forward(mats, alpha0):
    """Scaled forward pass; returns ``(log c_i, normalized alphas)``.

    ``alphas[i]`` is the filtered row vector after ``i`` events (``alphas[0]``
    is the start vector).
    """
    n = mats.shape[0]
    m = mats.reshape(n, 4).tolist()
    a0, a1 = float(alpha0[0]), float(alpha0[1])
    logc = np.empty(n)
    alphas = np.empty((n + 1, 2))
    alphas[0] = a0, a1
    for i, (m00, m01, m10, m11) in enumerate(m):
        v0 = a0 * m00 + a1 * m10
        v1 = a0 * m01 + a1 * m11
        c = v0 + v1
        if not c > 0:
            raise BmmppError("zero likelihood contribution", stage="likelihood",
                             data={"event": i})
        a0, a1 = v0 / c, v1 / c
        alphas[i + 1] = a0, a1
        logc[i] = math.log(c)
    return logc, alphas


def _backward(mats, logc):
    n = mats.shape[0]
    m = mats.reshape(n, 4).tolist()
    c = np.exp(logc).tolist()
    betas = np.empty((n + 1, 2))
    b0, b1 = 1.0, 1.0
    betas[n] = b0, b1
    for i in range(n - 1, -1, -1):
        m00, m01, m10, m11 = m[i]
        b0, b1 = (m00 * b0 + m01 * b1) / c[i], (m10 * b0 + m11 * b1) / c[i]
        betas[i] = b0, b1
    return betas


def loglik(model: BmmppModel, trace: Trace, alpha0=None) -> LikelihoodValue:
    """Log-likelihood of ``trace`` started from the event-stationary vector.

    ``alpha0`` overrides the start vector.
    """
    check(model)
    _check_trace(model, trace)
    if alpha0 is None:
        alpha0 = stationary_vectors(model).phi
    mats = _step_matrices(model, trace.t, trace.b)
    logc, _ = _forward(mats, np.asarray(alpha0, dtype=float))
    return LikelihoodValue(float(logc.sum()), len(trace), logc)


def _van_loan(d0, t, left, right):
    """``F_i = int_0^{t_i} exp(D0 (t_i - s)) right_i left_i exp(D0 s) ds``.

    ``right`` is a stack of column vectors and ``left`` of row vectors; the
    integral is the upper-right block of ``exp([[D0, B], [0, D0]] t)``.
    """
    n = t.size
    blk = np.zeros((n, 4, 4))
    blk[:, :2, :2] = d0
    blk[:, 2:, 2:] = d0
    blk[:, :2, 2:] = right[:, :, None] * left[:, None, :]
    blk *= t[:, None, None]
    return expm(blk)[:, :2, 2:]


@dataclass
class EmStats:
    sojourn: np.ndarray  # expected time per phase
    switches: np.ndarray  # expected silent switches (0->1, 1->0)
    emissions: np.ndarray  # (K, 2) expected batch-k events per phase
    start: np.ndarray  # posterior of the phase at time 0
    loglik: float


def e_step(model: BmmppModel, trace: Trace, alpha0) -> EmStats:
    t, b = trace.t, trace.b
    d0 = model.d0
    mats = _step_matrices(model, t, b)
    logc, alphas = _forward(mats, alpha0)
    betas = _backward(mats, logc)
    c = np.exp(logc)
    prev = alphas[:-1]  # filtered vector before interval i
    nxt = betas[1:]  # backward vector after event i
    dvec = model.dk[b - 1] * nxt  # D_{b_i} beta_i (diagonal D_k)
    f = _van_loan(d0, t, prev, dvec) / c[:, None, None]
    sojourn = np.array([f[:, 0, 0].sum(), f[:, 1, 1].sum()])
    switches = np.array([d0[0, 1] * f[:, 1, 0].sum(), d0[1, 0] * f[:, 0, 1].sum()])
    # emissions at the end of interval i in phase j
    reach = np.einsum("ni,nij->nj", prev, expm2(d0, t))
    post = reach * dvec / c[:, None]
    emissions = np.zeros((model.K, 2))
    np.add.at(emissions, b - 1, post)
    start = alpha0 * betas[0]
    return EmStats(sojourn, switches, emissions, start / start.sum(), float(logc.sum()))


def m_step(stats: EmStats) -> BmmppModel:
    tau = stats.sojourn
    y, r = stats.switches / tau
    dk = stats.emissions / tau
    rates = dk.sum(axis=0)
    d0 = np.array([[-y - rates[0], y], [r, -r - rates[1]]])
    return BmmppModel(d0, dk)


def em_fit(trace: Trace, K: int | None = None, init: BmmppModel | None = None,
           max_iter: int = 1000, tol: float = 1e-6, slack: float = 1e-8) -> FitResult:
    """Expectation-maximization for the hidden phase process.

    The start vector is estimated along with the rates (its posterior at
    time 0), which keeps every iteration a genuine EM step. The returned
    ``loglik_trace`` holds that objective per iteration; the stationary-start
    likelihood of the final model is available through :func:`loglik`.

    Raises ``ConvergenceError`` if an iteration lowers the objective by more
    than ``slack`` (relative to ``max(1, |loglik|)``).
    """
    t0 = time.perf_counter()
    K = trace.K if K is None else K
    if init is None:
        raise ValueError("em_fit needs an initial model")
    check(init)
    if init.K != K:
        raise ValueError(f"initial model has K={init.K}, expected {K}")
    _check_trace(init, trace)
    model = init
    alpha0 = stationary_vectors(model).phi if model.irreducible else np.array([0.5, 0.5])
    hist = []
    converged = False
    for _ in range(max_iter):
        st = e_step(model, trace, alpha0)
        if hist and st.loglik < hist[-1] - slack * max(1.0, abs(hist[-1])):
            raise ConvergenceError("EM objective decreased", stage="em",
                                   data={"previous": hist[-1], "current": st.loglik})
        hist.append(st.loglik)
        if len(hist) > 1 and abs(hist[-1] - hist[-2]) < tol:
            converged = True
            break
        model = m_step(st)
        alpha0 = st.start
    model = normalize_state_order(model)
    info = StageInfo(0, -hist[-1], model.d0.ravel().tolist(), int(converged), len(hist),
                     "converged" if converged else "max_iter reached")
    return FitResult(model, [info], time.perf_counter() - t0, empirical_moments(trace, K),
                     config={"max_iter": max_iter, "tol": tol}, method="em", loglik_trace=hist)


__all__ = ["LikelihoodValue", "loglik", "em_fit", "e_step", "m_step", "EmStats"]
