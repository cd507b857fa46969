"""Canonical MAP_2 form and the moments <-> parameters correspondence.

The canonical form of a two-state MAP with ``gamma > 0`` is::

    G0c = [[-z1, (1-a) z1], [0, -z2]]      G1c = [[a z1, 0], [(1-b) z2, b z2]]

with ``0 < z1 <= z2`` and ``a, b`` in ``[0, 1]``. For it ``gamma = a b`` and
the stationary vector at events is proportional to ``(1 - b, (1 - a) b)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .descriptors import MomentSet, mmpp_moments
from .errors import DegenerateError, InfeasibleMomentsError
from .model import BmmppModel, MmppModel, normalize_state_order

FEAS_TOL = 1e-9
POISSON_TOL = 1e-13


@dataclass(frozen=True)
class CanonicalMap2:
    zeta1: float
    zeta2: float
    a: float
    b: float
    degenerate: bool = False

    def __post_init__(self):
        for name in ("zeta1", "zeta2", "a", "b"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "degenerate", bool(self.degenerate))
        if not (self.zeta1 > 0 and self.zeta2 > 0):
            raise InfeasibleMomentsError("canonical rates must be positive", constraint="zeta > 0")
        if not (0 <= self.a <= 1 and 0 <= self.b <= 1):
            raise InfeasibleMomentsError("canonical probabilities outside [0, 1]",
                                         constraint="0 <= a, b <= 1")

    @property
    def g0(self) -> np.ndarray:
        z1, z2, a = self.zeta1, self.zeta2, self.a
        return np.array([[-z1, (1 - a) * z1], [0.0, -z2]])

    @property
    def g1(self) -> np.ndarray:
        z1, z2, a, b = self.zeta1, self.zeta2, self.a, self.b
        return np.array([[a * z1, 0.0], [(1 - b) * z2, b * z2]])

    def moments(self):
        """``(mu1, mu2, mu3, rho_T(1))`` of the canonical MAP."""
        z1, z2, a, b = self.zeta1, self.zeta2, self.a, self.b
        g = a * b
        if g >= 1.0:
            # P* = I: the renewal part is all that is left
            return _ph_moments(1.0, z1, z2, 1.0) + (0.0,)
        phi1 = (1 - b) / (1 - g)
        mu1, mu2, mu3 = _ph_moments(phi1, z1, z2, a)
        return mu1, mu2, mu3, g * (mu2 - 2 * mu1 * mu1) / (2 * (mu2 - mu1 * mu1))


def _ph_moments(phi1, z1, z2, a):
    # acyclic PH: start in 1 w.p. phi1; phase 1 exits w.p. a, else moves to 2
    # mu_r / r! = phi (-G0)^{-r} e
    i1, i2 = 1.0 / z1, 1.0 / z2
    v1, v2 = phi1, 1.0 - phi1
    out = []
    for fac in (1.0, 2.0, 6.0):
        v1, v2 = v1 * i1, v1 * (1 - a) * i2 + v2 * i2
        out.append(fac * (v1 + v2))
    return tuple(out)


def _disc(x, y, r, u):
    return math.sqrt((u - x) ** 2 + 4 * r * y)


def mmpp_to_canonical(m: MmppModel) -> CanonicalMap2:
    """Canonical form of an MMPP_2 via the closed-form similarity transform.

    The input is put in the order ``x + y >= r + u`` first; the canonical
    form is the same for both labellings.
    """
    g0 = m.g0
    if g0[0, 0] + g0[0, 1] < g0[1, 0] + g0[1, 1]:
        g0 = g0[::-1, ::-1]
    x, y, r, u = g0[0, 0], g0[0, 1], g0[1, 0], g0[1, 1]
    s = _disc(x, y, r, u)
    den = x + 2 * y - u + s
    if den == 0:
        raise DegenerateError("zero denominator x + 2y - u + sqrt(...)", stage="canonical")
    ratio = (x - 2 * r - u - s) / den
    z1 = -(x - y * ratio)
    z2 = -(u + y * ratio)
    a = (-x - y) / z1
    b = (-r - u) / z2
    return CanonicalMap2(z1, z2, a, b)


def canonical_to_mmpp(c: CanonicalMap2) -> MmppModel:
    """Inverse transform back to an MMPP_2 with ``x + y >= r + u``."""
    z1, z2, a, b = c.zeta1, c.zeta2, c.a, c.b
    den = a * z1 - b * z2
    if abs(den) <= 1e-14 * max(z1, z2):
        raise DegenerateError(
            "a*zeta1 == b*zeta2: equal event rates in both phases (Poisson case)",
            stage="canonical",
            data={"a*zeta1": a * z1, "b*zeta2": b * z2},
        )
    zz = z1 * z2
    g0 = np.array([
        [zz - a * z1 * z1 - a * zz + a * b * zz, -a * a * z1 * z1 + a * z1 * z1 + a * zz - zz],
        [(z1 - b * z2) * (z2 - b * z2), -zz + b * z2 * z2 + b * zz - a * b * zz],
    ]) / den
    return MmppModel(g0, [a * z1, b * z2])


def _is_poisson(mu1, mu2, mu3, tol):
    return abs(mu2 / (2 * mu1 * mu1) - 1) < tol and abs(mu3 / (6 * mu1**3) - 1) < tol


def moments_to_canonical(mu1, mu2, mu3, rhoT1, tol: float = FEAS_TOL) -> CanonicalMap2:
    """Canonical MAP_2 with the given inter-event moments and lag-1 correlation.

    The marginal is an order-2 phase-type law; its two rates come from a
    Prony-type solve of the three moments, ``gamma`` from ``rho_T(1)``, and
    ``(a, b)`` from a quadratic with ``a b = gamma``.

    Raises ``InfeasibleMomentsError`` naming the first violated constraint.
    """
    def bad(constraint, msg, **data):
        return InfeasibleMomentsError(msg, constraint=constraint, data=data)

    if not mu1 > 0:
        raise bad("mu1 > 0", "first moment must be positive", mu1=mu1)
    if not mu2 > mu1 * mu1:
        raise bad("mu2 > mu1^2", "variance must be positive", mu1=mu1, mu2=mu2)
    if _is_poisson(mu1, mu2, mu3, POISSON_TOL):
        if abs(rhoT1) > tol:
            raise bad("rho_T(1) == 0 for exponential marginal", "Poisson marginal with nonzero correlation")
        return CanonicalMap2(1 / mu1, 1 / mu1, 1.0, 1.0, degenerate=True)

    m1, m2, m3 = mu1, mu2 / 2, mu3 / 6
    if abs(m2 - m1 * m1) <= 1e-15 * m2:
        raise bad("mu2 != 2 mu1^2", "moments on the exponential line but not exponential")
    e1 = (m3 - m1 * m2) / (m2 - m1 * m1)
    e2 = m1 * e1 - m2
    disc = e1 * e1 - 4 * e2
    if disc < -tol * e1 * e1:
        raise bad("real phase rates", "no order-2 phase-type law has these three moments",
                  discriminant=disc)
    sq = math.sqrt(max(disc, 0.0))
    x1, x2 = (e1 + sq) / 2, (e1 - sq) / 2  # mean sojourns, x1 >= x2
    if not x2 > 0:
        raise bad("positive phase rates", "three moments imply a nonpositive rate", x1=x1, x2=x2)
    z1, z2 = 1 / x1, 1 / x2
    c1 = (m1 - x2) / (x1 - x2) if x1 > x2 else float("nan")

    rho_factor = (mu2 - 2 * mu1 * mu1) / (2 * (mu2 - mu1 * mu1))
    gamma = rhoT1 / rho_factor
    if gamma < -tol:
        raise bad("gamma >= 0", "lag-1 correlation has the wrong sign for this marginal", gamma=gamma)
    if gamma > 1 + tol:
        raise bad("gamma <= 1", "lag-1 correlation too large for this marginal", gamma=gamma)
    gamma = min(max(gamma, 0.0), 1.0)
    if x1 == x2:
        raise bad("zeta1 < zeta2", "coinciding phase rates")

    # (1 - gamma) c1 = (1 - b) (a + (1 - a) d) with b = gamma / a
    d = z2 / (z2 - z1)
    qa = 1 - d
    qb = d - gamma * (1 - d) - c1 * (1 - gamma)
    qc = -gamma * d
    roots = np.roots([qa, qb, qc]) if qa != 0 else np.array([-qc / qb])
    best, best_err = None, math.inf
    for a in roots:
        if abs(a.imag) > 1e-12 * max(1.0, abs(a.real)):
            continue
        a = float(a.real)
        if gamma == 0:
            b = 0.0 if a > tol else None
            if b is None:
                # a = 0 branch: b free, fix it from c1
                b = 1 - c1 / d
        else:
            if a <= 0:
                continue
            b = gamma / a
        viol = max(-a, a - 1, -b, b - 1, 0.0)
        if viol > tol:
            continue
        a, b = min(max(a, 0.0), 1.0), min(max(b, 0.0), 1.0)
        cand = CanonicalMap2(z1, z2, a, b, degenerate=gamma == 0)
        err = max(abs(v - w) / max(abs(w), 1e-300) for v, w in
                  zip(cand.moments()[:3], (mu1, mu2, mu3)))
        if err < best_err:
            best, best_err = cand, err
    if best is None:
        raise bad("0 <= a, b <= 1", "no canonical point with probabilities in [0, 1]",
                  zeta1=z1, zeta2=z2, gamma=gamma)
    return best


def solve_batch_split(d0, beta1, eta, clamp: float = 1e-9):
    """Rates ``(w, q)`` of ``D1 = diag(w, q)`` in a BMMPP_2(2) with given ``D0``.

    Closed form obtained by solving the ``beta1`` and ``E[TB]`` expressions
    for ``q`` and ``w``. Tiny negative values (above ``-clamp`` relative to
    the phase budget) are clamped to 0.
    """
    d0 = np.asarray(d0, dtype=float)
    x, y, r, u = d0[0, 0], d0[0, 1], d0[1, 0], d0[1, 1]
    bal = r + u - x - y
    if y == 0 or r == 0 or abs(bal) <= 1e-14 * max(1.0, abs(x), abs(u)):
        raise DegenerateError(
            "r + u == x + y (or y, r zero): batch split not identifiable",
            stage="batch-split",
            data={"x+y": x + y, "r+u": r + u},
        )
    h = r * x + 2 * r * y + y * u
    dd = x * u - r * y
    q = (h * (dd * eta - (y - u) * (beta1 - 2)) - (r * y - x * u) * (2 * r + 2 * y)) / (y * bal)
    w = (h * ((beta1 - 2) * (r - x) - dd * eta) + (r * y - x * u) * (2 * r + 2 * y)) / (r * bal)
    budget = (-x - y, -r - u)
    out = []
    for name, v, cap in (("w", w, budget[0]), ("q", q, budget[1])):
        scale = max(cap, 1.0)
        if v < 0:
            if v < -clamp * scale:
                raise InfeasibleMomentsError(
                    f"{name} = {v:.6g} < 0", constraint=f"{name} >= 0", stage="batch-split",
                    data={"w": w, "q": q, "budget": budget},
                )
            v = 0.0
        if v > cap:
            if v > cap + clamp * scale:
                raise InfeasibleMomentsError(
                    f"{name} = {v:.6g} exceeds phase budget {cap:.6g}",
                    constraint=f"{name} <= budget", stage="batch-split",
                    data={"w": w, "q": q, "budget": budget},
                )
            v = cap
        out.append(float(v))
    return tuple(out)


def _mmpp_excess_moments(y, r, a1, dlt):
    """``(mu1, mu2 - 2 mu1^2, mu3 - 6 mu1^3, rho_T(1))`` for event rates ``a1, a1 + dlt``.

    Every term is a sum of positive quantities, so the excesses over the
    exponential law keep full relative precision when ``dlt`` is tiny.
    """
    a2 = a1 + dlt
    det = a1 * a2 + a1 * r + a2 * y
    s = r * a1 + y * a2
    mu1 = (r * a1 * (a2 + r + y) + y * a2 * (a1 + r + y)) / (s * det)
    ex2 = 2.0 * r * y * dlt * dlt / (s * s * det)
    ex3 = 3.0 * ex2 * ((a1 + a2 + y + r) / det + mu1)
    rho = (a1 * a2 / det) * ex2 / (2.0 * (ex2 + mu1 * mu1))
    return np.array([mu1, ex2, ex3, rho], dtype=np.result_type(mu1, float))


def polish_d0(g0, mu1, mu2, mu3, rhoT1, tol: float = 1e-12, max_iter: int = 200):
    """Newton refinement of an MMPP_2 ``D0`` against its four defining moments.

    Works in ``(y, r, a1, a2 - a1)`` with relative residuals on the
    cancellation-free excesses, which stays well conditioned when the two
    event rates nearly coincide. Returns the input unchanged if no step
    improves the residual.
    """
    g0 = np.asarray(g0, dtype=float)
    a1, a2 = -g0[0].sum(), -g0[1].sum()
    p = np.array([g0[0, 1], g0[1, 0], a1, a2 - a1])
    target = np.array([mu1, mu2 - 2 * mu1 * mu1, mu3 - 6 * mu1**3, rhoT1])
    if np.any(target == 0) or p[0] <= 0 or p[1] <= 0 or p[2] <= 0 or p[3] == 0:
        return g0

    def res(v):
        return _mmpp_excess_moments(*v) / target - 1.0

    cur = res(p)
    best, best_norm = p, np.abs(cur).max()
    stall = 0
    for _ in range(max_iter):
        if best_norm < tol or stall >= 5:
            break
        # complex-step derivatives: exact to rounding for this rational map
        jac = np.empty((4, 4))
        for j in range(4):
            e = np.zeros(4, dtype=complex)
            e[j] = 1e-30j
            jac[:, j] = res(p + e).imag / 1e-30
        try:
            step = np.linalg.solve(jac, -cur)
        except np.linalg.LinAlgError:
            break
        # plain Newton steps (the residual may rise before the quadratic
        # phase), shortened only to stay inside the valid region
        lam = 1.0
        while lam > 1e-6:
            cand = p + lam * step
            if cand[0] > 0 and cand[1] > 0 and cand[2] > 0 and cand[2] + cand[3] > 0:
                break
            lam /= 2
        else:
            break
        p, cur = cand, res(cand)
        norm = np.abs(cur).max()
        if norm < best_norm:
            best, best_norm, stall = p, norm, 0
        else:
            stall += 1
    y, r, a1, dlt = best
    return np.array([[-a1 - y, y], [r, -(a1 + dlt) - r]])


def moments_to_model(ms: MomentSet, K: int | None = None) -> BmmppModel:
    """Rebuild the unique BMMPP_2(K) (phases ordered ``x + y >= r + u``) from its moments."""
    K = ms.K if K is None else K
    if K != ms.K:
        raise ValueError(f"moment set describes K={ms.K}, asked for K={K}")
    try:
        c = moments_to_canonical(ms.mu1, ms.mu2, ms.mu3, ms.rhoT1)
        if c.degenerate:
            raise InfeasibleMomentsError(
                "renewal/Poisson moments do not identify an irreducible MMPP_2",
                constraint="gamma > 0",
            )
        g0 = canonical_to_mmpp(c).g0
        g0 = polish_d0(g0, ms.mu1, ms.mu2, ms.mu3, ms.rhoT1)
    except (InfeasibleMomentsError, DegenerateError) as exc:
        exc.stage = "canonical"
        raise
    g0 = normalize_state_order(MmppModel.from_d0(g0).as_bmmpp()).d0
    wq = []
    budget = -g0.sum(axis=1)
    for i, (b1, et) in enumerate(zip(ms.beta1, ms.eta), start=1):
        try:
            w, q = solve_batch_split(g0, b1, et)
        except (InfeasibleMomentsError, DegenerateError) as exc:
            exc.stage = f"batch-split[{i}]"
            raise
        budget = budget - (w, q)
        if np.any(budget < -FEAS_TOL * max(1.0, np.abs(g0).max())):
            raise InfeasibleMomentsError(
                f"stage {i} exhausts the phase budget", constraint="sum of w, q <= -x-y, -r-u",
                stage=f"batch-split[{i}]", data={"budget": budget.tolist()},
            )
        wq.append((w, q))
    return BmmppModel.from_partial(g0, wq)


def mmpp_from_moments(mu1, mu2, mu3, rhoT1) -> MmppModel:
    g0 = canonical_to_mmpp(moments_to_canonical(mu1, mu2, mu3, rhoT1)).g0
    return MmppModel.from_d0(polish_d0(g0, mu1, mu2, mu3, rhoT1))


__all__ = [
    "CanonicalMap2", "MomentSet", "mmpp_to_canonical", "canonical_to_mmpp",
    "moments_to_canonical", "solve_batch_split", "moments_to_model", "mmpp_from_moments",
    "polish_d0",
    "mmpp_moments",
]
