"""Forward simulation: behavior -> evidence counts -> expected belief -> rating."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError
from .model import (
    Behavior,
    LogitParams,
    Opinion,
    RatingMatrix,
    check_bias,
    enumerate_compositions,
    expected_belief,
    multinomial_log_pmf,
    ordered_logit_pmf,
)


@dataclass
class GroundTruth:
    behaviors: np.ndarray  # (N, 3)
    biases: np.ndarray  # (M,)
    lambdas: dict[tuple[int, int], int]
    logit: LogitParams
    lambda_max: int | None = None

    def __post_init__(self):
        self.behaviors = np.asarray(self.behaviors, dtype=float).reshape(-1, 3)
        self.biases = np.asarray(self.biases, dtype=float)
        for row in self.behaviors:
            Behavior.from_array(row)
        for a in self.biases:
            check_bias(a)
        cap = self.lambda_max if self.lambda_max is not None else np.inf
        for (i, j), lam in self.lambdas.items():
            if not 1 <= lam <= cap:
                raise ParameterDomainError(f"lambda {lam} on edge ({i}, {j}) outside [1, {cap}]")
            if not (0 <= i < self.num_trustors and 0 <= j < self.num_trustees):
                raise ParameterDomainError(f"edge ({i}, {j}) out of range")

    @property
    def num_trustors(self) -> int:
        return int(self.biases.size)

    @property
    def num_trustees(self) -> int:
        return int(self.behaviors.shape[0])

    @property
    def levels(self) -> int:
        return self.logit.levels


def forward_sample_opinion(behavior: Behavior, lam: int, rng: np.random.Generator) -> Opinion:
    if lam < 1:
        raise ParameterDomainError("lambda must be >= 1")
    p = behavior.as_array() if isinstance(behavior, Behavior) else np.asarray(behavior, dtype=float)
    return Opinion(*map(int, rng.multinomial(int(lam), p)))


def draw_level(pmf: np.ndarray, u: float) -> int:
    """1-based level by inversion: first level whose cumulative mass exceeds ``u``."""
    cum = np.cumsum(pmf)
    k = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return min(k, pmf.size - 1) + 1


def forward_sample_rating(op: Opinion, bias: float, logit: LogitParams, rng: np.random.Generator) -> int:
    x = expected_belief(op, bias)
    return draw_level(ordered_logit_pmf(x, logit), rng.random())


def edge_rng(seed: int, i: int, j: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1, i, j])))


def forward_generate_network(
    truth: GroundTruth, seed: int
) -> tuple[RatingMatrix, dict[tuple[int, int], Opinion]]:
    """Sample an opinion then a rating on every edge of ``truth.lambdas``.

    Each edge draws from its own stream keyed by ``(seed, i, j)``, so results
    do not depend on iteration order.
    """
    entries: dict[tuple[int, int], int] = {}
    latents: dict[tuple[int, int], Opinion] = {}
    for (i, j), lam in sorted(truth.lambdas.items()):
        rng = edge_rng(seed, i, j)
        op = forward_sample_opinion(Behavior.from_array(truth.behaviors[j]), lam, rng)
        entries[(i, j)] = forward_sample_rating(op, float(truth.biases[i]), truth.logit, rng)
        latents[(i, j)] = op
    ratings = RatingMatrix.from_entries(
        truth.num_trustors, truth.num_trustees, truth.levels, entries, dict(truth.lambdas)
    )
    return ratings, latents


def random_truth(
    num_trustors: int,
    num_trustees: int,
    logit: LogitParams,
    rng: np.random.Generator,
    lambda_range: tuple[int, int] = (1, 30),
    density: float = 1.0,
) -> GroundTruth:
    """Ground truth with B ~ Dirichlet(1,1,1), a ~ U(0,1), lambda ~ U{lambda_range}.

    Each (i, j) pair is observed independently with probability ``density``.
    """
    lo, hi = lambda_range
    behaviors = rng.dirichlet(np.ones(3), size=num_trustees)
    biases = rng.random(num_trustors)
    lambdas = {}
    for i in range(num_trustors):
        for j in range(num_trustees):
            keep = density >= 1.0 or rng.random() < density
            lam = int(rng.integers(lo, hi + 1))
            if keep:
                lambdas[(i, j)] = lam
    return GroundTruth(behaviors, biases, lambdas, logit, lambda_max=hi)


def marginal_rating_pmf(behavior: Behavior, lam: int, bias: float, logit: LogitParams) -> np.ndarray:
    """Exact rating law of one edge, summing the logit pmf over all compositions."""
    out = np.zeros(logit.levels)
    for op in enumerate_compositions(lam):
        out += np.exp(multinomial_log_pmf(op, behavior)) * ordered_logit_pmf(expected_belief(op, bias), logit)
    return out
