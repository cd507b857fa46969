"""Closed-form helpers for 2x2 matrices.

Everything in the package works with two phases, so inverses, eigenvalues
and matrix exponentials are written out explicitly instead of going through
LAPACK. The functions accept a single ``(2, 2)`` array or a stack of them
where noted.
"""
import numpy as np

E = np.ones(2)


def det2(a):
    return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]


def inv2(a):
    d = det2(a)
    if np.any(d == 0):
        raise np.linalg.LinAlgError("singular 2x2 matrix")
    out = np.empty_like(a, dtype=float)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 1, 1] = a[..., 0, 0]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    return out / np.asarray(d)[..., None, None]


def generator_stationary(q):
    """Stationary row vector of a 2-state generator ``q``.

    Requires ``q[0, 1] + q[1, 0] > 0``.
    """
    a, b = q[0, 1], q[1, 0]
    s = a + b
    if s <= 0:
        raise ValueError("generator is reducible: no switching between phases")
    return np.array([b / s, a / s])


def stochastic_stationary(p):
    """Stationary row vector of a 2x2 stochastic matrix."""
    a, b = p[0, 1], p[1, 0]
    s = a + b
    if s <= 0:
        raise ValueError("stochastic matrix is reducible")
    return np.array([b / s, a / s])


def expm2(a, t):
    """``exp(a * t)`` for a real 2x2 matrix with real eigenvalues.

    ``t`` may be a scalar or a 1-d array; the result then has shape
    ``t.shape + (2, 2)``. Uses the spectral split
    ``exp(At) = c0 I + c1 (A - m I)`` with ``m = tr(A)/2``, written so that
    nearly equal eigenvalues do not cancel.
    """
    t = np.asarray(t, dtype=float)
    m = 0.5 * (a[0, 0] + a[1, 1])
    disc = 0.25 * (a[0, 0] - a[1, 1]) ** 2 + a[0, 1] * a[1, 0]
    if disc < 0:
        # complex pair; cannot happen for matrices with nonnegative off-diagonals
        d = np.sqrt(-disc)
        c0 = np.exp(m * t) * np.cos(d * t)
        c1 = np.exp(m * t) * np.sin(d * t) / d
    else:
        d = np.sqrt(disc)
        lp = m + d
        ep = np.exp(lp * t)
        em1 = -np.expm1(-2.0 * d * t)  # 1 - exp(-2 d t)
        c0 = ep * (1.0 - 0.5 * em1)
        with np.errstate(invalid="ignore", divide="ignore"):
            c1 = np.where(d * t < 1e-8, t * np.exp(m * t), ep * em1 / (2.0 * d))
    shifted = a - m * np.eye(2)
    return c0[..., None, None] * np.eye(2) + c1[..., None, None] * shifted


def generator_expm(q, t):
    """``exp(q t)`` for a 2-state generator via ``e pi + exp(-s t)(I - e pi)``."""
    pi = generator_stationary(q)
    s = q[0, 1] + q[1, 0]
    ep = np.outer(E, pi)
    t = np.asarray(t, dtype=float)
    return ep + np.exp(-s * t)[..., None, None] * (np.eye(2) - ep)
