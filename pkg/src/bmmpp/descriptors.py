"""Exact stationary descriptors of a BMMPP_2(K).

All quantities come from the phase-type representation ``{phi, D0}`` of the
stationary inter-event time and the embedded chain ``P* = (-D0)^{-1} D`` at
event epochs.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from ._linalg import E, inv2, stochastic_stationary, generator_stationary
from .errors import DegenerateError
from .model import BmmppModel


class StationaryVectors(NamedTuple):
    pi: np.ndarray
    phi: np.ndarray
    pstar: np.ndarray
    gamma: float


class _Core(NamedTuple):
    minv: np.ndarray  # (-D0)^{-1}
    phi: np.ndarray
    pstar: np.ndarray
    gamma: float
    phim: np.ndarray  # phi (-D0)^{-1}
    excess: float  # mu2 - 2 mu1^2


def _core(model: BmmppModel) -> _Core:
    model.require_irreducible()
    rates = model.event_rates
    if np.all(rates <= 0):
        raise DegenerateError("zero event rate: inter-event times are infinite", stage="descriptors")
    minv = inv2(-model.d0)
    pstar = minv * rates  # (-D0)^{-1} diag(rates)
    phi = stochastic_stationary(pstar)
    a1, a2 = rates
    y, r = model.y, model.r
    det = a1 * a2 + a1 * r + a2 * y
    gamma = a1 * a2 / det
    excess = _excess(y, r, a1, a2, det)
    return _Core(minv, phi, pstar, gamma, phi @ minv, excess)


def _excess(y, r, a1, a2, det):
    """``mu2 - 2 mu1^2`` without cancellation.

    It vanishes exactly when both phases have the same event rate, and the
    naive difference loses all digits near that point.
    """
    s = r * a1 + y * a2
    return 2.0 * r * y * (a2 - a1) ** 2 / (s * s * det)


def stationary_vectors(model: BmmppModel) -> StationaryVectors:
    c = _core(model)
    return StationaryVectors(generator_stationary(model.generator), c.phi, c.pstar, c.gamma)


def _time_moments(c: _Core, rmax: int) -> list:
    out, v = [], c.phi
    for r in range(1, rmax + 1):
        v = v @ c.minv
        out.append(math.factorial(r) * v.sum())
    return out


def time_moments(model: BmmppModel, r: int) -> float:
    """``mu_r = r! phi (-D0)^{-r} e``."""
    if r < 1:
        raise ValueError("moment order must be >= 1")
    return _time_moments(_core(model), r)[-1]


def _rho_t(mu1, mu2, gamma, lag, excess=None):
    var = mu2 - mu1 * mu1
    if var <= 0:
        raise DegenerateError("inter-event time variance is zero", stage="descriptors")
    if excess is None:
        excess = mu2 - 2 * mu1 * mu1
    return gamma**lag * excess / (2 * var)


def rho_T(model: BmmppModel, l: int = 1) -> float:
    """Lag-``l`` autocorrelation of the inter-event times."""
    if l < 1:
        raise ValueError("lag must be >= 1")
    c = _core(model)
    mu1, mu2 = _time_moments(c, 2)
    return _rho_t(mu1, mu2, c.gamma, l, c.excess)


def batch_pmf(model: BmmppModel) -> np.ndarray:
    """``P(B = k) = phi (-D0)^{-1} D_k e`` for ``k = 1 ... K``."""
    c = _core(model)
    return model.dk @ c.phim


def batch_moments(model: BmmppModel, r: int) -> float:
    """``beta_r = E[B^r]``."""
    k = np.arange(1, model.K + 1)
    return float(np.dot(k**r, batch_pmf(model)))


def _d1star(model):
    return np.arange(1, model.K + 1) @ model.dk


def rho_B(model: BmmppModel, l: int = 1) -> float:
    """Lag-``l`` autocorrelation of the batch sizes.

    Raises ``DegenerateError`` when the batch size has zero variance.
    """
    if l < 1:
        raise ValueError("lag must be >= 1")
    c = _core(model)
    return _rho_b(model, c, [l])[0]


def _rho_b(model, c, lags):
    k = np.arange(1, model.K + 1)
    pmf = model.dk @ c.phim
    b1, b2 = k @ pmf, (k * k) @ pmf
    var = b2 - b1 * b1
    if var <= 1e-15 * max(1.0, b2):
        raise DegenerateError("batch size has zero variance; rho_B undefined", stage="descriptors")
    d1s = _d1star(model)
    left = c.phim * d1s  # phi (-D0)^{-1} D1*
    right = c.minv @ d1s  # (-D0)^{-1} D1* e
    out = []
    for l in lags:
        v = left @ np.linalg.matrix_power(c.pstar, l - 1)
        out.append(float((v @ right - b1 * b1) / var))
    return out


def eta(model: BmmppModel) -> float:
    """Joint moment ``E[T B] = phi (-D0)^{-2} D1* e``."""
    c = _core(model)
    return float(c.phim @ (c.minv @ _d1star(model)))


def cov_corr_TB(model: BmmppModel) -> tuple:
    """Covariance and correlation of an inter-event time and the batch closing it.

    The correlation is reported as 0 when the batch size is constant (its
    covariance is then exactly 0).
    """
    c = _core(model)
    mu1, mu2 = _time_moments(c, 2)
    k = np.arange(1, model.K + 1)
    pmf = model.dk @ c.phim
    b1, b2 = k @ pmf, (k * k) @ pmf
    et = float(c.phim @ (c.minv @ _d1star(model)))
    cov = et - mu1 * b1
    vb = b2 - b1 * b1
    if vb <= 1e-15 * max(1.0, b2):
        return float(cov), 0.0
    return float(cov), float(cov / math.sqrt((mu2 - mu1 * mu1) * vb))


@dataclass
class MomentSet:
    """The ``2(K+1)`` moments that characterize a BMMPP_2(K).

    ``beta1[i-1]`` and ``eta[i-1]`` belong to the sub-process isolating batch
    size ``i``, for ``i = 1 ... K-1``.
    """

    mu1: float
    mu2: float
    mu3: float
    rhoT1: float
    beta1: tuple = ()
    eta: tuple = ()

    @property
    def K(self) -> int:
        return len(self.beta1) + 1

    def as_array(self) -> np.ndarray:
        pairs = [v for be in zip(self.beta1, self.eta) for v in be]
        return np.array([self.mu1, self.mu2, self.mu3, self.rhoT1, *pairs])

    @classmethod
    def from_array(cls, a) -> "MomentSet":
        a = [float(v) for v in a]
        return cls(*a[:4], tuple(a[4::2]), tuple(a[5::2]))


def _sub_beta_eta(model, c, i):
    # BMMPP_2(2) {D0, D_i, rest}: P(B=1) = phi M D_i e, D1* = 2D - D_i
    di = model.dk[i - 1]
    p1 = c.phim @ di
    d1s = 2.0 * model.event_rates - di
    return 2.0 - p1, float(c.phim @ (c.minv @ d1s))


def moment_set(model: BmmppModel) -> MomentSet:
    c = _core(model)
    mu1, mu2, mu3 = _time_moments(c, 3)
    pairs = [_sub_beta_eta(model, c, i) for i in range(1, model.K)]
    return MomentSet(
        mu1, mu2, mu3, _rho_t(mu1, mu2, c.gamma, 1, c.excess),
        tuple(float(p[0]) for p in pairs), tuple(p[1] for p in pairs),
    )


def mmpp_moments(x, y, r, u):
    """``(mu1, mu2, mu3, rho_T(1))`` of the MMPP_2 with ``D0 = [[x, y], [r, u]]``.

    Plain-float closed form used inside optimizers; no validation.
    """
    a1, a2 = -x - y, -r - u  # event rates
    det = x * u - y * r
    # (-D0)^{-1} = [[-u, y], [r, -x]] / det
    m00, m01, m10, m11 = -u / det, y / det, r / det, -x / det
    p00, p11 = m00 * a1, m11 * a2
    p01, p10 = m01 * a2, m10 * a1
    s = p01 + p10
    f0, f1 = p10 / s, p01 / s
    v0, v1 = f0, f1
    mus = []
    for fac in (1.0, 2.0, 6.0):
        v0, v1 = v0 * m00 + v1 * m10, v0 * m01 + v1 * m11
        mus.append(fac * (v0 + v1))
    mu1, mu2, mu3 = mus
    if a1 > 0 and a2 > 0 and y > 0 and r > 0:
        gamma = a1 * a2 / det
        rho = gamma * _excess(y, r, a1, a2, det) / (2 * (mu2 - mu1 * mu1))
    else:
        gamma = p00 + p11 - 1.0
        rho = gamma * (mu2 - 2 * mu1 * mu1) / (2 * (mu2 - mu1 * mu1))
    return mu1, mu2, mu3, rho


@dataclass
class DescriptorReport:
    """Full set of stationary descriptors.

    ``skewness`` and ``kurtosis`` are the standardized raw moments
    ``E[T^3] / sigma^3`` and ``E[T^4] / sigma^4`` (an exponential law gives
    6 and 24), not the central versions.
    """

    mu1: float
    mu2: float
    mu3: float
    mu4: float
    cv: float
    skewness: float
    kurtosis: float
    rhoT: dict = field(default_factory=dict)
    beta: dict = field(default_factory=dict)
    rhoB: dict = field(default_factory=dict)
    eta: float = float("nan")
    covTB: float = float("nan")
    corrTB: float = float("nan")
    pmfB: list = field(default_factory=list)
    beta1_sub: list = field(default_factory=list)
    eta_sub: list = field(default_factory=list)

    def flat(self) -> dict:
        """Single-level mapping, one column per scalar descriptor."""
        out = {}
        for name, val in asdict(self).items():
            if isinstance(val, dict):
                for k, v in val.items():
                    out[f"{name}_{k}"] = v
            elif isinstance(val, list):
                for k, v in enumerate(val, start=1):
                    out[f"{name}_{k}"] = v
            else:
                out[name] = val
        return out

    def to_json(self) -> str:
        d = asdict(self)
        for key in ("rhoT", "beta", "rhoB"):
            d[key] = {str(k): v for k, v in d[key].items()}
        return json.dumps(d, indent=2)

    def to_csv_row(self, header: bool = True) -> str:
        flat = self.flat()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(flat), lineterminator="\n")
        if header:
            w.writeheader()
        w.writerow({k: repr(float(v)) for k, v in flat.items()})
        return buf.getvalue()


def describe(model: BmmppModel, lags: int = 3, moments: int = 2) -> DescriptorReport:
    c = _core(model)
    mu1, mu2, mu3, mu4 = _time_moments(c, 4)
    sd = math.sqrt(mu2 - mu1 * mu1)
    k = np.arange(1, model.K + 1)
    pmf = model.dk @ c.phim
    beta = {r: float((k**r) @ pmf) for r in range(1, moments + 1)}
    try:
        rhob = dict(zip(range(1, lags + 1), _rho_b(model, c, range(1, lags + 1))))
    except DegenerateError:
        rhob = {l: float("nan") for l in range(1, lags + 1)}
    cov, corr = cov_corr_TB(model)
    subs = [_sub_beta_eta(model, c, i) for i in range(1, model.K)]
    return DescriptorReport(
        mu1=mu1, mu2=mu2, mu3=mu3, mu4=mu4,
        cv=sd / mu1, skewness=mu3 / sd**3, kurtosis=mu4 / sd**4,
        rhoT={l: _rho_t(mu1, mu2, c.gamma, l, c.excess) for l in range(1, lags + 1)},
        beta=beta, rhoB=rhob,
        eta=float(c.phim @ (c.minv @ _d1star(model))),
        covTB=cov, corrTB=corr, pmfB=[float(p) for p in pmf],
        beta1_sub=[float(s[0]) for s in subs], eta_sub=[s[1] for s in subs],
    )


__all__ = [
    "StationaryVectors", "stationary_vectors", "time_moments", "rho_T", "batch_pmf",
    "batch_moments", "rho_B", "eta", "cov_corr_TB", "MomentSet", "moment_set",
    "mmpp_moments", "DescriptorReport", "describe",
]
