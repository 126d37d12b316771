"""Domain types and exact probability kernels.

Everything here is a pure function of its inputs. Probabilities are handled
in log space with ``gammaln`` so that evidence counts well above 170 stay
finite.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import expit, gammaln, xlogy
from scipy.special import logsumexp as _logsumexp

from .errors import (
    DegenerateOpinionError,
    InvalidCutpointsError,
    ParameterDomainError,
    ZeroNormalizerError,
)

SIMPLEX_TOL = 1e-12


class Opinion(NamedTuple):
    """Evidence counts (belief, distrust, neutral) on one trustor->trustee edge."""

    alpha: int
    beta: int
    gamma: int

    @property
    def lam(self) -> int:
        return self.alpha + self.beta + self.gamma


@dataclass(frozen=True)
class Behavior:
    """A trustee's point (b, d, n) on the probability simplex."""

    b: float
    d: float
    n: float

    def __post_init__(self):
        for v in (self.b, self.d, self.n):
            if not (0.0 <= v <= 1.0):
                raise ParameterDomainError(f"behavior component {v} outside [0, 1]")
        if abs(self.b + self.d + self.n - 1.0) > SIMPLEX_TOL:
            raise ParameterDomainError(
                f"behavior ({self.b}, {self.d}, {self.n}) does not sum to 1"
            )

    @classmethod
    def from_array(cls, arr) -> "Behavior":
        b, d, n = (float(x) for x in arr)
        return cls(b, d, n)

    def as_array(self) -> np.ndarray:
        return np.array([self.b, self.d, self.n])


def check_bias(a: float) -> float:
    a = float(a)
    if not (0.0 <= a <= 1.0):
        raise ParameterDomainError(f"bias {a} outside [0, 1]")
    return a


@dataclass(frozen=True)
class LogitParams:
    """Ordered-logit link: slope ``epsilon`` and non-increasing cutpoints ``theta``.

    ``P(y > l) = sigmoid(epsilon * x + theta[l-1])`` for ``l = 1 .. L-1``.
    """

    epsilon: float
    theta: tuple[float, ...]

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        if len(theta) < 1:
            raise InvalidCutpointsError("need at least one cutpoint (levels >= 2)")
        if any(np.isnan(theta)):
            raise InvalidCutpointsError("cutpoints contain NaN")
        if any(theta[k] < theta[k + 1] for k in range(len(theta) - 1)):
            raise InvalidCutpointsError(f"cutpoints must be non-increasing, got {theta}")

    @property
    def levels(self) -> int:
        return len(self.theta) + 1


@dataclass(frozen=True)
class RatingMatrix:
    """Sparse ordinal ratings, stored as parallel edge arrays sorted by (trustor, trustee).

    ``lambdas`` optionally carries known evidence totals per edge (used by the
    fixed-lambda sampler mode).
    """

    num_trustors: int
    num_trustees: int
    levels: int
    trustors: np.ndarray = field(repr=False)
    trustees: np.ndarray = field(repr=False)
    ratings: np.ndarray = field(repr=False)
    lambdas: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.levels < 2:
            raise ParameterDomainError("levels must be >= 2")
        i = np.asarray(self.trustors, dtype=np.int64)
        j = np.asarray(self.trustees, dtype=np.int64)
        r = np.asarray(self.ratings, dtype=np.int64)
        if not (i.shape == j.shape == r.shape and i.ndim == 1):
            raise ParameterDomainError("edge arrays must be 1-d and equally long")
        order = np.lexsort((j, i))
        i, j, r = i[order], j[order], r[order]
        lam = None
        if self.lambdas is not None:
            lam = np.asarray(self.lambdas, dtype=np.int64)[order]
            if lam.shape != i.shape or (lam.size and lam.min() < 1):
                raise ParameterDomainError("known lambdas must be >= 1, one per edge")
        if i.size:
            if i.min() < 0 or i.max() >= self.num_trustors:
                raise ParameterDomainError("trustor index out of range")
            if j.min() < 0 or j.max() >= self.num_trustees:
                raise ParameterDomainError("trustee index out of range")
            if r.min() < 1 or r.max() > self.levels:
                raise ParameterDomainError(f"ratings must lie in 1..{self.levels}")
            dup = (np.diff(i) == 0) & (np.diff(j) == 0)
            if dup.any():
                k = int(np.argmax(dup))
                raise ParameterDomainError(f"duplicate edge ({i[k]}, {j[k]})")
        for name, arr in (("trustors", i), ("trustees", j), ("ratings", r), ("lambdas", lam)):
            if arr is not None:
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_entries(
        cls,
        num_trustors: int,
        num_trustees: int,
        levels: int,
        entries: Mapping[tuple[int, int], int],
        lambdas: Mapping[tuple[int, int], int] | None = None,
    ) -> "RatingMatrix":
        keys = list(entries)
        lam = None if lambdas is None else [lambdas[k] for k in keys]
        return cls(
            num_trustors,
            num_trustees,
            levels,
            np.array([k[0] for k in keys], dtype=np.int64),
            np.array([k[1] for k in keys], dtype=np.int64),
            np.array([entries[k] for k in keys], dtype=np.int64),
            None if lam is None else np.array(lam, dtype=np.int64),
        )

    @property
    def num_edges(self) -> int:
        return int(self.ratings.size)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.trustors.tolist(), self.trustees.tolist()))

    @property
    def entries(self) -> dict[tuple[int, int], int]:
        return dict(zip(self.edges, self.ratings.tolist()))

    def edge_index(self, i: int, j: int) -> int:
        hits = np.flatnonzero((self.trustors == i) & (self.trustees == j))
        if hits.size == 0:
            raise KeyError((i, j))
        return int(hits[0])


# ---------------------------------------------------------------- kernels


def expected_belief(op: Opinion | Sequence[int], bias: float) -> float:
    """``(alpha + a * gamma) / lambda`` for a single opinion."""
    alpha, beta, gamma = op
    lam = alpha + beta + gamma
    if lam <= 0:
        raise DegenerateOpinionError("expected belief undefined for an opinion with no evidence")
    a = check_bias(bias)
    return (alpha + a * gamma) / lam


def expected_belief_array(alpha, beta, gamma, bias) -> np.ndarray:
    """Vectorised expected belief; all arguments broadcast."""
    alpha = np.asarray(alpha, dtype=float)
    lam = alpha + np.asarray(beta, dtype=float) + np.asarray(gamma, dtype=float)
    return (alpha + np.asarray(bias, dtype=float) * gamma) / lam


def sigmoid(x):
    return expit(x)


def softplus(x):
    return np.logaddexp(0.0, x)


def log1mexp(d):
    """``log(1 - exp(d))`` for ``d <= 0``, accurate near zero and in the tail."""
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d > -np.log(2.0), np.log(-np.expm1(d)), np.log1p(-np.exp(d)))


def ordered_logit_pmf(x: float, params: LogitParams) -> np.ndarray:
    """Level probabilities ``[P(y=1), ..., P(y=L)]`` at covariate ``x``."""
    if not isinstance(params, LogitParams):
        raise InvalidCutpointsError("params must be a validated LogitParams")
    upper = sigmoid(params.epsilon * float(x) + np.asarray(params.theta))
    cum = np.concatenate(([1.0], upper, [0.0]))
    return cum[:-1] - cum[1:]


def ordered_logit_logpmf(eta, theta, rating) -> np.ndarray:
    """Log ``P(y = rating)`` given linear predictor ``eta = epsilon * x``.

    ``theta`` has the L-1 cutpoints on its last axis and broadcasts with
    ``eta``/``rating`` over the leading axes. ``rating`` is 1-based.
    """
    eta = np.asarray(eta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    rating = np.asarray(rating, dtype=np.int64)
    pad_shape = theta.shape[:-1] + (1,)
    padded = np.concatenate(
        (np.full(pad_shape, np.inf), theta, np.full(pad_shape, -np.inf)), axis=-1
    )
    shape = np.broadcast_shapes(eta.shape, rating.shape, theta.shape[:-1])
    padded = np.broadcast_to(padded, shape + padded.shape[-1:])
    r = np.broadcast_to(rating, shape)[..., None]
    hi = np.take_along_axis(padded, r - 1, axis=-1)[..., 0]
    lo = np.take_along_axis(padded, r, axis=-1)[..., 0]
    u = eta + hi
    v = eta + lo
    with np.errstate(invalid="ignore"):
        out = -softplus(-u) - softplus(v) + log1mexp(np.minimum(v - u, 0.0))
    # one-sided levels: v - u is -inf and log1mexp(-inf) = 0 already; keep exact
    out = np.where(np.isposinf(u), -softplus(v), out)
    out = np.where(np.isneginf(v), -softplus(-u), out)
    return out


def multinomial_log_pmf(op: Opinion | Sequence[int], behavior: Behavior | Sequence[float]) -> float:
    """Log multinomial probability of the counts under ``behavior``.

    Zero-probability categories with positive counts give ``-inf``.
    """
    counts = np.asarray(tuple(op), dtype=float)
    p = behavior.as_array() if isinstance(behavior, Behavior) else np.asarray(behavior, dtype=float)
    if counts.min() < 0:
        raise ParameterDomainError("counts must be nonnegative")
    lam = counts.sum()
    with np.errstate(divide="ignore"):
        return float(gammaln(lam + 1) - gammaln(counts + 1).sum() + xlogy(counts, p).sum())


def dirichlet_log_pdf(behavior: Behavior | Sequence[float], op: Opinion | Sequence[float]) -> float:
    """Log density of ``Dirichlet(alpha, beta, gamma)`` at ``behavior``."""
    conc = np.asarray(tuple(op), dtype=float)
    if conc.min() < 1:
        raise ParameterDomainError(
            f"Dirichlet parameters must be >= 1 here, got {tuple(op)}"
        )
    x = behavior.as_array() if isinstance(behavior, Behavior) else np.asarray(behavior, dtype=float)
    with np.errstate(divide="ignore"):
        return float(
            gammaln(conc.sum()) - gammaln(conc).sum() + xlogy(conc - 1.0, x).sum()
        )


def enumerate_compositions(lam: int) -> list[Opinion]:
    """All ``(alpha, beta, gamma)`` summing to ``lam``.

    Order: alpha descending, then beta descending. Sampled categorical indices
    refer to positions in this list.
    """
    if lam < 0:
        raise ParameterDomainError("lambda must be >= 0")
    return [
        Opinion(a, b, lam - a - b)
        for a in range(lam, -1, -1)
        for b in range(lam - a, -1, -1)
    ]


def num_compositions(lam: int) -> int:
    return (lam + 1) * (lam + 2) // 2


class CompositionTable(NamedTuple):
    """Compositions of every total ``0..lambda_max`` laid end to end.

    Block ``lam`` occupies ``offsets[lam]:offsets[lam + 1]``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    log_coef: np.ndarray
    offsets: np.ndarray

    def block(self, lo: int, hi: int) -> slice:
        return slice(int(self.offsets[lo]), int(self.offsets[hi + 1]))


@lru_cache(maxsize=16)
def composition_table(lambda_max: int) -> CompositionTable:
    comps = [c for lam in range(lambda_max + 1) for c in enumerate_compositions(lam)]
    arr = np.array(comps, dtype=np.int64).reshape(-1, 3)
    offsets = np.zeros(lambda_max + 2, dtype=np.int64)
    offsets[1:] = np.cumsum([num_compositions(lam) for lam in range(lambda_max + 1)])
    log_coef = gammaln(arr.sum(axis=1) + 1.0) - gammaln(arr + 1.0).sum(axis=1)
    table = CompositionTable(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), log_coef, offsets)
    for a in table:
        a.setflags(write=False)
    return table


def grid_midpoints(lo: float, hi: float, n: int) -> np.ndarray:
    """Midpoints of ``n`` equal cells partitioning ``[lo, hi]``."""
    if n < 1 or not hi > lo:
        raise ParameterDomainError(f"bad grid: [{lo}, {hi}] with {n} cells")
    width = (hi - lo) / n
    return lo + width * (np.arange(n) + 0.5)


def simplex_lattice(subdivisions: int) -> np.ndarray:
    """Barycentric lattice ``{(p, q, r) / k}`` on the 2-simplex, composition order."""
    comps = np.array(enumerate_compositions(subdivisions), dtype=float)
    return comps / subdivisions


def logsumexp(x, axis=None):
    return _logsumexp(x, axis=axis)


def normalize_log_weights(logw: np.ndarray) -> np.ndarray:
    """Turn log weights into probabilities; raises if everything underflows."""
    logw = np.asarray(logw, dtype=float)
    top = np.max(logw)
    if not np.isfinite(top):
        raise ZeroNormalizerError("all weights are zero")
    w = np.exp(logw - top)
    return w / w.sum()


def iter_opinions(arr: Iterable) -> list[Opinion]:
    return [Opinion(int(a), int(b), int(g)) for a, b, g in arr]
