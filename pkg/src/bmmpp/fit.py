"""Sequential moment-matching estimation of a BMMPP_2(K) from a trace.

Stage 0 fits ``D0`` to ``(mu1, mu2, mu3, rho_T(1))`` by multistart bounded
least squares. Stage ``k`` then fixes ``D1 ... D_{k-1}`` and fits the rates
``(w_k, q_k)`` of ``D_k`` to the first batch moment and ``E[T B]`` of the
process that only tells size ``k`` apart from all other sizes. Those two
quantities are affine in ``(w_k, q_k)``, so every stage after the first is a
convex box-constrained linear least-squares problem.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import least_squares, lsq_linear

from .descriptors import DescriptorReport, MomentSet, mmpp_moments
from .errors import BmmppError, ConvergenceError, InfeasibleMomentsError
from .model import BmmppModel, normalize_state_order, validate
from .simulate import RngSpec, Trace, as_generator

SLACK = 1e-10
PENALTY = 1e6


@dataclass
class EmpiricalMoments:
    """Sample moments of a trace, in the layout the fitter consumes.

    ``beta1[k-1]`` and ``eta[k-1]`` are computed on batches collapsed to
    ``1`` (size equals ``k``) or ``2`` (any other size).
    """

    mu1: float
    mu2: float
    mu3: float
    rhoT1: float
    beta1: tuple = ()
    eta: tuple = ()
    n: int = 0
    cv: float = float("nan")
    rhoT: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.beta1) + 1

    def moment_set(self) -> MomentSet:
        return MomentSet(self.mu1, self.mu2, self.mu3, self.rhoT1, tuple(self.beta1), tuple(self.eta))

    @classmethod
    def from_moment_set(cls, ms: MomentSet, n: int = 0) -> "EmpiricalMoments":
        sd = math.sqrt(max(ms.mu2 - ms.mu1**2, 0.0))
        return cls(ms.mu1, ms.mu2, ms.mu3, ms.rhoT1, tuple(ms.beta1), tuple(ms.eta), n,
                   sd / ms.mu1, {1: ms.rhoT1})


def sample_autocorr(x, lag: int) -> float:
    """Lag autocovariance (mean of ``n - lag`` products) over the ``1/n`` variance."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if lag >= n:
        raise ValueError("lag exceeds sample length")
    xc = x - x.mean()
    c0 = np.dot(xc, xc) / n
    if c0 <= 0:
        raise BmmppError("constant sample: autocorrelation undefined", stage="fit",
                         data={"n": int(n)})
    return float(np.dot(xc[:-lag], xc[lag:]) / (n - lag) / c0)


def collapse(b, k: int) -> np.ndarray:
    """Batch labels for the size-``k`` sub-process: 1 if ``b == k`` else 2."""
    return np.where(np.asarray(b) == k, 1, 2)


def empirical_moments(trace: Trace, K: int | None = None, lags: int = 3) -> EmpiricalMoments:
    if len(trace) < 4:
        raise BmmppError("need at least 4 events", stage="fit", data={"n": len(trace)})
    K = trace.K if K is None else K
    if trace.K > K:
        raise BmmppError(f"trace has batch size {trace.K} > K={K}", stage="fit")
    t = trace.t
    mu1, mu2, mu3 = (float(np.mean(t**r)) for r in (1, 2, 3))
    rho = {l: sample_autocorr(t, l) for l in range(1, min(lags, len(t) - 1) + 1)}
    beta, eta = [], []
    for k in range(1, K):
        bs = collapse(trace.b, k)
        beta.append(float(bs.mean()))
        eta.append(float(np.mean(t * bs)))
    return EmpiricalMoments(mu1, mu2, mu3, rho[1], tuple(beta), tuple(eta), len(t),
                            float(t.std() / mu1), rho)


def empirical_descriptors(trace: Trace, K: int | None = None, lags: int = 3,
                          moments: int = 2) -> DescriptorReport:
    """Sample counterpart of :func:`bmmpp.descriptors.describe`."""
    K = trace.K if K is None else K
    t, b = trace.t, trace.b.astype(float)
    mu = [float(np.mean(t**r)) for r in range(1, 5)]
    sd = float(t.std())
    pmf = np.bincount(trace.b, minlength=K + 1)[1:K + 1] / len(b)
    sb = float(b.std())
    cov = float(np.mean(t * b) - t.mean() * b.mean())
    em = empirical_moments(trace, K, lags)
    return DescriptorReport(
        mu1=mu[0], mu2=mu[1], mu3=mu[2], mu4=mu[3],
        cv=sd / mu[0], skewness=mu[2] / sd**3, kurtosis=mu[3] / sd**4,
        rhoT={l: sample_autocorr(t, l) for l in range(1, lags + 1)},
        beta={r: float(np.mean(b**r)) for r in range(1, moments + 1)},
        rhoB={l: (sample_autocorr(b, l) if sb > 0 else float("nan")) for l in range(1, lags + 1)},
        eta=float(np.mean(t * b)), covTB=cov,
        corrTB=cov / (sd * sb) if sb > 0 else 0.0,
        pmfB=[float(p) for p in pmf],
        beta1_sub=list(em.beta1), eta_sub=list(em.eta),
    )


@dataclass
class FitConfig:
    """Settings of the sequential fitter.

    ``start_box`` bounds the uniform multistart draws of ``(y, r, -x-y, -r-u)``
    in units of ``1 / mu1``.
    """

    tau: float = 1e-3
    multistart: int = 100
    start_box: tuple = (0.0, 50.0)
    rng: RngSpec = field(default_factory=RngSpec)
    variant: str = "general"
    max_nfev: int = 2000

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")
        if self.variant not in ("general", "iid-batch"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if isinstance(self.rng, dict):
            self.rng = RngSpec(**self.rng)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StageInfo:
    stage: int
    objective: float
    params: list
    n_success: int = 0
    n_starts: int = 0
    message: str = ""


@dataclass
class FitResult:
    model: BmmppModel
    stages: list
    wall_time: float
    empirical: EmpiricalMoments | None = None
    config: dict = field(default_factory=dict)
    method: str = "moments"
    loglik_trace: list = field(default_factory=list)

    @property
    def objectives(self) -> list:
        return [s.objective for s in self.stages]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "model": self.model.to_dict(),
            "stages": [asdict(s) for s in self.stages],
            "wall_time": self.wall_time,
            "empirical": None if self.empirical is None else {
                k: v for k, v in asdict(self.empirical).items() if k != "rhoT"
            },
            "config": self.config,
            "loglik_trace": list(self.loglik_trace),
        }


def _d0_from(p, scale):
    y, r, a1, a2 = np.asarray(p) / scale
    return np.array([[-a1 - y, y], [r, -a2 - r]])


def _p0_residuals(p, target, sqrt_tau):
    y, r, a1, a2 = p
    try:
        with np.errstate(all="raise"):
            m1, m2, m3, rho = mmpp_moments(-a1 - y, y, r, -a2 - r)
    except FloatingPointError:
        return np.full(4, PENALTY)
    out = np.array([
        rho - target[3],
        sqrt_tau * (m1 / target[0] - 1),
        sqrt_tau * (m2 / target[1] - 1),
        sqrt_tau * (m3 / target[2] - 1),
    ])
    if not np.all(np.isfinite(out)):
        return np.full(4, PENALTY)
    return out


def fit_d0(em: EmpiricalMoments, cfg: FitConfig = FitConfig()) -> tuple:
    """Multistart solve of the ``D0`` problem.

    Minimizes ``(rho_T(1) - rho_bar)^2 + tau * sum_r ((mu_r - mu_bar_r) / mu_bar_r)^2``
    over ``y, r >= 0`` and event rates ``-x-y, -r-u >= 1e-10``. Time is
    rescaled by ``mu_bar_1`` during the search.

    Returns
    -------
    d0 : ndarray
        Best ``D0``, phases ordered so ``x + y >= r + u``.
    info : StageInfo
    """
    if not (em.mu1 > 0 and em.mu2 > 0 and em.mu3 > 0):
        raise BmmppError("empirical moments must be positive", stage="fit[0]")
    scale = em.mu1
    target = np.array([1.0, em.mu2 / scale**2, em.mu3 / scale**3, em.rhoT1])
    sqrt_tau = math.sqrt(cfg.tau)
    gen = as_generator(cfg.rng)
    lo, hi = cfg.start_box
    starts = gen.uniform(lo, hi, (cfg.multistart, 4))
    lb = np.array([0.0, 0.0, SLACK, SLACK])
    starts = np.maximum(starts, lb + 1e-6)
    best, n_ok = None, 0
    for x0 in starts:
        try:
            sol = least_squares(_p0_residuals, x0, bounds=(lb, np.inf),
                                args=(target, sqrt_tau), method="trf",
                                x_scale="jac", max_nfev=cfg.max_nfev,
                                xtol=1e-14, ftol=1e-15, gtol=1e-15)
        except (ValueError, FloatingPointError):
            continue
        obj = float(np.sum(sol.fun**2))
        if not math.isfinite(obj) or obj >= PENALTY:
            continue
        n_ok += 1
        key = (obj, tuple(sol.x))
        if best is None or key < best[0]:
            best = (key, sol)
    if best is None:
        raise ConvergenceError("no multistart run of the D0 problem converged", stage="fit[0]",
                               data={"starts": cfg.multistart})
    (obj, _), sol = best
    d0 = _d0_from(sol.x, scale)
    d0 = normalize_state_order(BmmppModel.from_partial(d0)).d0
    return d0, StageInfo(0, obj, d0.ravel().tolist(), n_ok, cfg.multistart, str(sol.message))


def sub_moment_coeffs(d0):
    """Affine maps of ``(w, q)`` to ``beta1`` and ``eta`` of a sub-BMMPP_2(2).

    Returns ``(b0, bw, bq), (e0, ew, eq)`` such that
    ``beta1 = b0 + bw w + bq q`` and ``eta = e0 + ew w + eq q``.
    """
    d0 = np.asarray(d0, dtype=float)
    rates = -d0.sum(axis=1)
    det = d0[0, 0] * d0[1, 1] - d0[0, 1] * d0[1, 0]
    m = np.array([[-d0[1, 1], d0[0, 1]], [d0[1, 0], -d0[0, 0]]]) / det
    pstar = m * rates
    s = pstar[0, 1] + pstar[1, 0]
    phi = np.array([pstar[1, 0], pstar[0, 1]]) / s
    phim = phi @ m
    phim2 = phim @ m
    return (2.0, -phim[0], -phim[1]), (2.0 * float(phim2 @ rates), -phim2[0], -phim2[1])


def fit_stage_k(d0, prior, em: EmpiricalMoments, cfg: FitConfig, k: int) -> tuple:
    """Rates ``(w_k, q_k)`` minimizing the stage-``k`` relative moment error.

    ``prior`` holds the already fitted ``(w_j, q_j)``, ``j < k``. In the
    ``iid-batch`` variant ``D_k`` is kept proportional to the total event-rate
    matrix, which makes batch sizes independent of the phase.
    """
    d0 = np.asarray(d0, dtype=float)
    rates = -d0.sum(axis=1)
    used = np.sum(np.asarray(prior, dtype=float).reshape(-1, 2), axis=0)
    budget = rates - used
    tol = 1e-9 * max(1.0, np.abs(d0).max())
    if np.any(budget < -tol):
        raise InfeasibleMomentsError("negative remaining budget", constraint="budget >= 0",
                                     stage=f"fit[{k}]", data={"budget": budget.tolist()})
    budget = np.maximum(budget, 0.0)
    bt, et = em.beta1[k - 1], em.eta[k - 1]
    (b0, bw, bq), (e0, ew, eq) = sub_moment_coeffs(d0)
    # relative residuals are affine in (w, q)
    A = np.array([[bw / bt, bq / bt], [ew / et, eq / et]])
    c = np.array([1 - b0 / bt, 1 - e0 / et])
    if cfg.variant == "iid-batch":
        if np.any(rates <= 0):
            raise BmmppError("iid-batch variant needs positive event rates in both phases",
                             stage=f"fit[{k}]")
        v = A @ rates
        cap = min(budget[0] / rates[0], budget[1] / rates[1])
        p = float(np.clip(np.dot(v, c) / np.dot(v, v), 0.0, cap)) if np.dot(v, v) > 0 else 0.0
        wq = p * rates
    else:
        if np.all(budget == 0):
            wq = np.zeros(2)
        else:
            # a zero budget pins the variable; lsq_linear needs lb < ub
            ub = np.where(budget > 0, budget, 1e-300)
            sol = lsq_linear(A, c, bounds=(np.zeros(2), ub), method="bvls", tol=1e-14)
            wq = np.clip(sol.x, 0.0, budget)
    res = A @ wq - c
    obj = float(cfg.tau * np.dot(res, res))
    return (float(wq[0]), float(wq[1])), StageInfo(k, obj, [float(wq[0]), float(wq[1])], 1, 1)


def fit_moments(em: EmpiricalMoments, K: int | None = None, cfg: FitConfig = FitConfig()) -> FitResult:
    """Run all stages on precomputed empirical moments."""
    t0 = time.perf_counter()
    K = em.K if K is None else K
    if K != em.K:
        raise ValueError(f"empirical moments carry K={em.K}, asked for K={K}")
    d0, info0 = fit_d0(em, cfg)
    stages, prior = [info0], []
    for k in range(1, K):
        try:
            wq, info = fit_stage_k(d0, prior, em, cfg, k)
        except BmmppError as exc:
            exc.stage = f"fit[{k}]"
            raise
        prior.append(wq)
        stages.append(info)
    if cfg.variant == "iid-batch" and K > 1:
        rates = -d0.sum(axis=1)
        p = [w / rates[0] for w, _ in prior]
        dk = np.outer(np.append(p, 1.0 - sum(p)), rates)
        dk[-1] = np.maximum(dk[-1], 0.0)
        model = BmmppModel(d0, dk)
    else:
        model = BmmppModel.from_partial(d0, prior)
    rep = validate(model)
    if rep.errors:
        raise BmmppError("fitted model failed validation", stage="fit",
                         data={"violations": rep.names()})
    return FitResult(model, stages, time.perf_counter() - t0, em,
                     config=cfg.to_dict(), method=f"moments/{cfg.variant}")


def fit(trace: Trace, K: int | None = None, cfg: FitConfig = FitConfig()) -> FitResult:
    """Fit a BMMPP_2(K) to ``trace``; ``K`` defaults to the largest batch seen."""
    t0 = time.perf_counter()
    K = trace.K if K is None else K
    em = empirical_moments(trace, K)
    res = fit_moments(em, K, cfg)
    res.wall_time = time.perf_counter() - t0
    return res


def compare_reports(emp: DescriptorReport, est: DescriptorReport) -> list:
    """Rows ``(name, empirical, fitted, relative difference)`` over shared descriptors."""
    a, b = emp.flat(), est.flat()
    rows = []
    for name, va in a.items():
        if name not in b:
            continue
        vb = b[name]
        rel = abs(vb - va) / abs(va) if va not in (0, 0.0) and math.isfinite(va) else float("nan")
        rows.append((name, float(va), float(vb), float(rel)))
    return rows


__all__ = [
    "EmpiricalMoments", "FitConfig", "FitResult", "StageInfo", "empirical_moments",
    "empirical_descriptors", "sample_autocorr", "collapse", "fit_d0", "fit_stage_k",
    "fit_moments", "fit", "sub_moment_coeffs", "compare_reports",
]
