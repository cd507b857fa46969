"""Parameter objects for the two-state batch MMPP and conversions between them.

A ``BmmppModel`` stores ``D0`` as a full 2x2 matrix and the batch matrices
``D1 ... DK`` by their diagonals, one row ``(w_k, q_k)`` per batch size.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidModelError, ReducibleModelError

TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BmmppModel:
    """Rate matrices ``{D0, D1, ..., DK}`` of a BMMPP_2(K).

    Parameters
    ----------
    d0 : array_like, shape (2, 2)
        Rates of transitions without an event, ``[[x, y], [r, u]]``.
    dk : array_like, shape (K, 2)
        Row ``k - 1`` holds the diagonal ``(w_k, q_k)`` of ``D_k``. The last
        row is ``D_K``; it is normally whatever closes the row sums.
    """

    d0: np.ndarray
    dk: np.ndarray

    def __post_init__(self):
        d0 = _frozen(self.d0)
        dk = np.array(self.dk, dtype=float)
        if dk.ndim == 1:
            dk = dk.reshape(1, 2)
        if d0.shape != (2, 2) or dk.ndim != 2 or dk.shape[1] != 2 or dk.shape[0] < 1:
            raise InvalidModelError(
                f"bad shapes: d0 {d0.shape}, dk {dk.shape}; expected (2, 2) and (K, 2)"
            )
        # floating-point closure of the row-sum constraint
        dk[(dk < 0) & (dk > -TOL * max(1.0, np.abs(d0).max()))] = 0.0
        dk.setflags(write=False)
        object.__setattr__(self, "d0", d0)
        object.__setattr__(self, "dk", dk)

    @classmethod
    def from_partial(cls, d0, wq: Sequence[Sequence[float]] = ()) -> "BmmppModel":
        """Build a model from ``D0`` and ``D1 ... D_{K-1}``; ``D_K`` closes the rows."""
        d0 = np.asarray(d0, dtype=float)
        wq = np.asarray(wq, dtype=float).reshape(-1, 2)
        last = -d0.sum(axis=1) - wq.sum(axis=0)
        return cls(d0, np.vstack([wq, last]))

    @property
    def K(self) -> int:
        return self.dk.shape[0]

    x = property(lambda self: self.d0[0, 0])
    y = property(lambda self: self.d0[0, 1])
    r = property(lambda self: self.d0[1, 0])
    u = property(lambda self: self.d0[1, 1])

    @property
    def w(self) -> np.ndarray:
        return self.dk[:, 0]

    @property
    def q(self) -> np.ndarray:
        return self.dk[:, 1]

    def D(self, k: int) -> np.ndarray:
        """Full 2x2 matrix ``D_k`` for ``k = 0 ... K``."""
        if k == 0:
            return np.array(self.d0)
        return np.diag(self.dk[k - 1])

    @property
    def event_rates(self) -> np.ndarray:
        """Diagonal of ``D = D1 + ... + DK``."""
        return self.dk.sum(axis=0)

    @property
    def generator(self) -> np.ndarray:
        return self.d0 + np.diag(self.event_rates)

    @property
    def irreducible(self) -> bool:
        return self.y > 0 and self.r > 0

    def require_irreducible(self):
        if not self.irreducible:
            raise ReducibleModelError(
                f"stationary analysis needs y > 0 and r > 0 (y={self.y}, r={self.r})",
                data={"y": float(self.y), "r": float(self.r)},
            )

    def permuted(self) -> "BmmppModel":
        """Same process with the two phases relabelled."""
        p = [1, 0]
        return BmmppModel(self.d0[np.ix_(p, p)], self.dk[:, p])

    def allclose(self, other: "BmmppModel", atol=1e-12, rtol=0.0) -> bool:
        return (
            self.K == other.K
            and np.allclose(self.d0, other.d0, atol=atol, rtol=rtol)
            and np.allclose(self.dk, other.dk, atol=atol, rtol=rtol)
        )

    def to_dict(self) -> dict:
        return {"K": self.K, "D0": self.d0.tolist(), "Dk": self.dk.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BmmppModel":
        m = cls(d["D0"], d["Dk"])
        if "K" in d and int(d["K"]) != m.K:
            raise InvalidModelError(f"K={d['K']} but {m.K} batch matrices given")
        return m

    def __repr__(self):
        dk = ", ".join(f"({w:.6g}, {q:.6g})" for w, q in self.dk)
        return f"BmmppModel(d0={self.d0.tolist()}, dk=[{dk}])"


@dataclass(frozen=True, eq=False)
class MmppModel:
    """Two-state MMPP ``{G0, G1}``; ``g1`` holds the diagonal of ``G1``."""

    g0: np.ndarray
    g1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "g0", _frozen(self.g0))
        g1 = np.array(self.g1, dtype=float)
        if g1.shape == (2, 2):
            g1 = np.diag(g1).copy()
        g1[(g1 < 0) & (g1 > -TOL)] = 0.0
        g1.setflags(write=False)
        object.__setattr__(self, "g1", g1)

    @classmethod
    def from_d0(cls, g0) -> "MmppModel":
        g0 = np.asarray(g0, dtype=float)
        return cls(g0, -g0.sum(axis=1))

    def as_bmmpp(self) -> BmmppModel:
        return BmmppModel(self.g0, self.g1.reshape(1, 2))


@dataclass(frozen=True)
class ProbParam:
    """Sojourn rates and jump probabilities of a BMMPP_2(K).

    ``p11[k-1]`` (``p22[k-1]``) is the probability that a sojourn in phase 1
    (2) ends with a batch of size ``k``; ``p120`` (``p210``) that it ends with
    a silent switch.
    """

    lambda1: float
    lambda2: float
    p120: float
    p210: float
    p11: tuple = field(default_factory=tuple)
    p22: tuple = field(default_factory=tuple)


@dataclass
class Violation:
    invariant: str
    value: object
    message: str = ""

    def __str__(self):
        return f"{self.invariant}: {self.message} (value={self.value})"


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def names(self):
        return [v.invariant for v in self.errors]


def validate(model: BmmppModel, tol: float = TOL) -> ValidationReport:
    """Check every invariant of the rate representation.

    Returns a report whose ``errors`` list is empty iff the model is a
    valid BMMPP_2(K). Reducibility (``y == 0`` or ``r == 0``) and a zero
    total event rate are reported as warnings.
    """
    rep = ValidationReport()
    x, y, r, u = model.x, model.y, model.r, model.u
    if y < 0:
        rep.errors.append(Violation("y >= 0", y, "negative off-diagonal of D0"))
    if r < 0:
        rep.errors.append(Violation("r >= 0", r, "negative off-diagonal of D0"))
    if not x < 0:
        rep.errors.append(Violation("x < 0", x, "diagonal of D0 must be negative"))
    if not u < 0:
        rep.errors.append(Violation("u < 0", u, "diagonal of D0 must be negative"))
    neg = np.argwhere(model.dk < 0)
    for k, i in neg:
        rep.errors.append(
            Violation(f"D{k + 1}[{i},{i}] >= 0", model.dk[k, i], "negative batch rate")
        )
    rows = model.d0.sum(axis=1) + model.dk.sum(axis=0)
    scale = max(1.0, float(np.abs(model.d0).max()))
    for i, s in enumerate(rows):
        if abs(s) > tol * scale:
            rep.errors.append(
                Violation(f"row {i} sum of D0+...+DK == 0", s, "Q is not a generator")
            )
    if y == 0 or r == 0:
        rep.warnings.append(Violation("irreducible", (y, r), "y or r is zero"))
    if np.all(model.event_rates <= 0):
        rep.warnings.append(Violation("event rate > 0", 0.0, "no events are ever produced"))
    return rep


def check(model: BmmppModel) -> BmmppModel:
    rep = validate(model)
    if not rep.ok:
        raise InvalidModelError(
            "invalid model: " + "; ".join(str(v) for v in rep.errors),
            data={"violations": rep.names()},
        )
    return model


def from_prob_params(p: ProbParam, tol: float = TOL) -> BmmppModel:
    p11 = np.asarray(p.p11, dtype=float)
    p22 = np.asarray(p.p22, dtype=float)
    if p11.shape != p22.shape or p11.ndim != 1 or p11.size < 1:
        raise InvalidModelError("p11 and p22 must be 1-d sequences of the same length K")
    probs = np.concatenate([[p.p120, p.p210], p11, p22])
    if np.any(probs < 0) or np.any(probs > 1):
        raise InvalidModelError("probabilities must lie in [0, 1]", stage="prob-params")
    s1, s2 = p.p120 + p11.sum(), p.p210 + p22.sum()
    if abs(s1 - 1) > tol or abs(s2 - 1) > tol:
        raise InvalidModelError(
            f"jump probabilities do not sum to 1 (phase 1: {s1}, phase 2: {s2})",
            stage="prob-params",
        )
    if p.lambda1 <= 0 or p.lambda2 <= 0:
        raise InvalidModelError("sojourn rates must be positive", stage="prob-params")
    l1, l2 = p.lambda1, p.lambda2
    d0 = [[-l1, l1 * p.p120], [l2 * p.p210, -l2]]
    return BmmppModel(d0, np.column_stack([l1 * p11, l2 * p22]))


def to_prob_params(model: BmmppModel) -> ProbParam:
    l1, l2 = -model.x, -model.u
    return ProbParam(
        l1, l2, model.y / l1, model.r / l2, tuple(model.w / l1), tuple(model.q / l2)
    )


def embedded_mmpp(model: BmmppModel) -> MmppModel:
    """MMPP obtained by forgetting batch sizes: ``G0 = D0``, ``G1 = D1 + ... + DK``."""
    return MmppModel(model.d0, model.event_rates)


def sub_bmmpp2(model: BmmppModel, i: int) -> BmmppModel:
    """The BMMPP_2(2) ``{D0, D_i, sum_{k != i} D_k}`` isolating batch size ``i``."""
    if not 1 <= i <= model.K:
        raise IndexError(f"batch index {i} outside 1..{model.K}")
    di = model.dk[i - 1]
    rest = model.event_rates - di
    return BmmppModel(model.d0, np.vstack([di, rest]))


def size_k_mmpp(model: BmmppModel, k: int) -> MmppModel:
    """MMPP counting only size-``k`` events; other batches become silent."""
    if not 1 <= k <= model.K:
        raise IndexError(f"batch index {k} outside 1..{model.K}")
    g0 = model.d0 + np.diag(model.event_rates - model.dk[k - 1])
    return MmppModel(g0, model.dk[k - 1])


def normalize_state_order(model: BmmppModel) -> BmmppModel:
    """Relabel phases so that ``x + y >= r + u``; ties keep the input order."""
    if model.x + model.y >= model.r + model.u:
        return model
    return model.permuted()


def make_iid_batch(mmpp: MmppModel, p: Sequence[float], tol: float = 1e-12) -> BmmppModel:
    """MMPP with i.i.d. batch sizes: ``D_k = G1 * p_k``."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 1 or np.any(p < 0) or abs(p.sum() - 1) > tol:
        raise InvalidModelError("batch pmf must be nonnegative and sum to 1", stage="iid-batch")
    return BmmppModel(mmpp.g0, np.outer(p, mmpp.g1))


def load_model(path) -> BmmppModel:
    with open(path) as fh:
        return BmmppModel.from_dict(json.load(fh))


def save_model(model: BmmppModel, path):
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


# reference processes used throughout tests and scripts
EXAMPLE_K2 = BmmppModel([[-5.0, 2.0], [5.0, -10.0]], [[1.0, 2.0], [2.0, 3.0]])
EXAMPLE_K4 = BmmppModel(
    [[-0.58, 0.09], [1.91, -14.20]],
    [[0.08, 11.47], [0.15, 0.10], [0.25, 0.60], [0.01, 0.12]],
)
