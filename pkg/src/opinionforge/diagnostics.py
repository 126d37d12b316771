"""Chain health and recovery scoring."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import spearmanr

from .errors import KeyMismatchError, PreconditionError
from .generative import GroundTruth, draw_level
from .inference import GibbsState, PosteriorSummary, SamplerConfig, Trace, gibbs_step
from .model import (
    Opinion,
    RatingMatrix,
    expected_belief_array,
    ordered_logit_pmf,
    LogitParams,
)

MIN_SERIES = 10
MIN_GEWEKE_ROUNDS = 1000

# scalars tracked for every trace
GEWEKE_STATISTICS = (
    "mean_expected_belief",
    "mean_b",
    "mean_d",
    "mean_bias",
    "epsilon",
    "theta_1",
    "mean_lambda",
    "frac_rating_1",
)


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = x.size
    y = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(y, size)
    acf = np.fft.irfft(f * np.conj(f), size)[:n]
    with np.errstate(divide="ignore", invalid="ignore"):
        return acf / acf[0]


def effective_sample_size(series) -> float:
    """Initial-positive-sequence ESS (Geyer 1992).

    A constant series has no autocorrelation to speak of; its ESS is defined
    as its length. The estimate is clamped to ``(0, n]``.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < MIN_SERIES:
        raise PreconditionError(f"ESS needs at least {MIN_SERIES} values, got {n}")
    if not np.all(np.isfinite(x)):
        raise PreconditionError("series contains non-finite values")
    if np.ptp(x) == 0:
        return float(n)
    rho = _autocorr(x)
    if not np.all(np.isfinite(rho)):
        # spread so small that squared deviations underflow: indistinguishable from constant
        return float(n)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    ess = n / tau if tau > 0 else float(n)
    return float(min(max(ess, 1.0), n))


def _mean_and_se(x: np.ndarray) -> tuple[float, float]:
    if np.ptp(x) == 0:
        return float(x.mean()), 0.0
    return float(x.mean()), float(np.sqrt(x.var(ddof=1) / effective_sample_size(x)))


def geweke_z(series, first: float = 0.1, last: float = 0.5) -> float:
    """Within-chain convergence z-score: early window mean vs late window mean."""
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    a, b = x[: int(first * n)], x[n - int(last * n) :]
    if a.size < MIN_SERIES or b.size < MIN_SERIES:
        raise PreconditionError("series too short for Geweke windows")
    ma, sa = _mean_and_se(a)
    mb, sb = _mean_and_se(b)
    se = np.hypot(sa, sb)
    if se == 0:
        return 0.0 if ma == mb else float(np.sign(ma - mb) * np.inf)
    return float((ma - mb) / se)


def two_chain_z(chain_a, chain_b) -> float:
    """Difference of two independent chain means in standard-error units."""
    ma, sa = _mean_and_se(np.asarray(chain_a, dtype=float))
    mb, sb = _mean_and_se(np.asarray(chain_b, dtype=float))
    se = np.hypot(sa, sb)
    if se == 0:
        return 0.0 if ma == mb else float(np.sign(ma - mb) * np.inf)
    return float((ma - mb) / se)


@dataclass
class ChainStats:
    statistics: tuple[str, ...]
    ess: np.ndarray
    geweke_z: np.ndarray
    length: int
    thin: int = 1

    def __post_init__(self):
        self.ess = np.asarray(self.ess, dtype=float)
        self.geweke_z = np.asarray(self.geweke_z, dtype=float)
        if np.any(self.ess <= 0) or np.any(self.ess > self.length):
            raise PreconditionError("ESS must lie in (0, trace length]")

    def to_dict(self) -> dict:
        return {
            "statistics": list(self.statistics),
            "ess": self.ess.tolist(),
            "geweke_z": self.geweke_z.tolist(),
            "length": self.length,
            "thin": self.thin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainStats":
        return cls(tuple(d["statistics"]), d["ess"], d["geweke_z"], int(d["length"]), int(d["thin"]))

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.geweke_z)))


def state_statistics(state: GibbsState, ratings: RatingMatrix) -> np.ndarray:
    """The monitored scalars, in ``GEWEKE_STATISTICS`` order."""
    return np.array([
        float(state.expected_beliefs(ratings).mean()),
        float(state.behaviors[:, 0].mean()),
        float(state.behaviors[:, 1].mean()),
        float(state.biases.mean()),
        float(state.epsilon),
        float(state.theta[0]),
        float(state.lambdas.mean()),
        float(np.mean(ratings.ratings == 1)),
    ])


def monitored_series(trace: Trace) -> dict[str, np.ndarray]:
    rows = np.array([state_statistics(s, trace.ratings) for s in trace.samples]).reshape(-1, len(GEWEKE_STATISTICS))
    return {name: rows[:, k] for k, name in enumerate(GEWEKE_STATISTICS)}


def chain_stats(trace: Trace) -> ChainStats:
    series = monitored_series(trace)
    names = tuple(n for n in GEWEKE_STATISTICS if n != "frac_rating_1")
    return ChainStats(
        statistics=names,
        ess=[effective_sample_size(series[n]) for n in names],
        geweke_z=[geweke_z(series[n]) for n in names],
        length=len(trace),
        thin=trace.config.thin,
    )


def plot_rows(trace: Trace) -> list[tuple[int, str, float]]:
    """Long-format ``(iteration, statistic, value)`` rows for external plotting."""
    series = monitored_series(trace)
    iters = [s.iteration for s in trace.samples]
    return [(it, name, float(series[name][k])) for k, it in enumerate(iters) for name in GEWEKE_STATISTICS]


# -------------------------------------------------------------- Geweke test


def sample_prior_state(ratings: RatingMatrix, config: SamplerConfig, rng: np.random.Generator) -> GibbsState:
    """Exact draw of every latent from the prior the sampler targets.

    B ~ Dirichlet(1,1,1); a, epsilon uniform on their grids; theta uniform over
    strictly decreasing grid tuples; lambda uniform on [1, lambda_max] (or the
    known totals in fixed mode); omega ~ Mul(B_j, lambda).
    """
    E, M, N, L = ratings.num_edges, ratings.num_trustors, ratings.num_trustees, ratings.levels
    behaviors = rng.dirichlet(np.ones(3), size=N)
    biases = rng.choice(config.bias_values, size=M)
    if config.lambda_mode == "fixed":
        lam = np.asarray(ratings.lambdas, dtype=np.int64)
    else:
        lam = rng.integers(1, config.lambda_max + 1, size=E)
    opinions = np.array(
        [rng.multinomial(int(lam[e]), behaviors[ratings.trustees[e]]) for e in range(E)], dtype=np.int64
    ).reshape(E, 3)
    theta = np.sort(rng.choice(config.theta_values, size=L - 1, replace=False))[::-1].copy()
    epsilon = float(rng.choice(config.epsilon_values))
    return GibbsState(opinions, behaviors, biases, epsilon, theta, 0)


def simulate_ratings(state: GibbsState, template: RatingMatrix, rng: np.random.Generator) -> RatingMatrix:
    """Fresh ratings on the template's edges given every latent."""
    x = state.expected_beliefs(template)
    logit = LogitParams(state.epsilon, tuple(state.theta))
    u = rng.random(template.num_edges)
    new = np.array([draw_level(ordered_logit_pmf(float(xe), logit), ue) for xe, ue in zip(x, u)], dtype=np.int64)
    return RatingMatrix(
        template.num_trustors, template.num_trustees, template.levels,
        template.trustors, template.trustees, new, template.lambdas,
    )


@dataclass
class GewekeResult:
    stats: ChainStats
    marginal_mean: np.ndarray
    successive_mean: np.ndarray


def geweke_joint_test(
    config: SamplerConfig,
    truth_prior_sampler: Callable[[np.random.Generator], GibbsState] | None = None,
    rounds: int = 10_000,
    template: RatingMatrix | None = None,
    seed: int = 0,
) -> GewekeResult:
    """Marginal-conditional vs successive-conditional simulator comparison.

    The marginal-conditional side draws (latents, ratings) independently from
    the prior and the likelihood. The successive-conditional side alternates a
    fresh rating draw with one Gibbs sweep. A correct sampler leaves the joint
    invariant, so every monitored statistic has the same mean under both.
    """
    if rounds < MIN_GEWEKE_ROUNDS:
        raise PreconditionError(f"Geweke test needs at least {MIN_GEWEKE_ROUNDS} rounds")
    if template is None:
        template = RatingMatrix.from_entries(2, 2, 3, {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): 1})
    if truth_prior_sampler is None:
        truth_prior_sampler = lambda rng: sample_prior_state(template, config, rng)  # noqa: E731
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))

    mc = np.empty((rounds, len(GEWEKE_STATISTICS)))
    for t in range(rounds):
        s = truth_prior_sampler(rng)
        mc[t] = state_statistics(s, simulate_ratings(s, template, rng))

    sc = np.empty_like(mc)
    state = truth_prior_sampler(rng)
    for t in range(rounds):
        data = simulate_ratings(state, template, rng)
        sc[t] = state_statistics(state, data)
        state = gibbs_step(state, data, config)

    z = np.empty(len(GEWEKE_STATISTICS))
    ess = np.empty_like(z)
    for k in range(z.size):
        a, b = mc[:, k], sc[:, k]
        ess[k] = effective_sample_size(b)
        var = a.var(ddof=1) / rounds + b.var(ddof=1) / ess[k]
        z[k] = 0.0 if var == 0 else (a.mean() - b.mean()) / np.sqrt(var)
    stats = ChainStats(GEWEKE_STATISTICS, ess, z, rounds, 1)
    return GewekeResult(stats, mc.mean(axis=0), sc.mean(axis=0))


# ------------------------------------------------------------ recovery score


@dataclass
class RecoveryScore:
    spearman: float
    epsilon_error: float
    theta_error: np.ndarray
    behavior_error: np.ndarray
    bias_error: np.ndarray


def spearman(x, y) -> float:
    return float(spearmanr(np.asarray(x, dtype=float), np.asarray(y, dtype=float)).statistic)


def recovery_score(truth: GroundTruth, latents: dict[tuple[int, int], Opinion], summary: PosteriorSummary) -> RecoveryScore:
    """Rank agreement of true vs posterior-mean expected beliefs, plus absolute errors."""
    edges = list(summary.edges)
    if set(edges) != set(latents) or len(edges) != len(latents):
        raise KeyMismatchError("summary edges and true latents cover different edges")
    if summary.behaviors_mean.shape != truth.behaviors.shape or summary.biases_mean.shape != truth.biases.shape:
        raise KeyMismatchError("summary and truth disagree on trustor/trustee counts")
    ops = np.array([latents[e] for e in edges], dtype=float).reshape(-1, 3)
    bias = truth.biases[[i for i, _ in edges]]
    true_eb = expected_belief_array(ops[:, 0], ops[:, 1], ops[:, 2], bias)
    return RecoveryScore(
        spearman=spearman(true_eb, summary.expected_belief_mean),
        epsilon_error=abs(summary.epsilon_mean - truth.logit.epsilon),
        theta_error=np.abs(np.asarray(summary.theta_mean) - np.asarray(truth.logit.theta)),
        behavior_error=np.abs(summary.behaviors_mean - truth.behaviors),
        bias_error=np.abs(summary.biases_mean - truth.biases),
    )
