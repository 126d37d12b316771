"""Gibbs sampler over (B, O, a, lambda, theta, epsilon).

Each conditional is exposed twice: a ``*_logpmf`` / ``*_params`` function
returning the exact distribution the sampler draws from, and a ``sample_*``
function drawing from it. ``gibbs_step`` runs one sweep in the order
B -> O -> a -> lambda -> theta -> epsilon.

Randomness is counter based: every stage of every sweep gets its own
generator keyed by ``(seed, iteration, stage, sub)``, and per-entity
uniforms are drawn as one vector indexed by entity. Serial and threaded
kernels therefore consume identical numbers.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import (
    EmptySupportError,
    ParameterDomainError,
    PreconditionError,
    ZeroNormalizerError,
)
from .model import (
    Behavior,
    LogitParams,
    Opinion,
    RatingMatrix,
    composition_table,
    expected_belief_array,
    grid_midpoints,
    logsumexp,
    multinomial_log_pmf,
)

log = logging.getLogger(__name__)

LAMBDA_MODES = ("fixed", "blocked_joint", "paper_literal")

STAGE_BEHAVIOR = 0
STAGE_OPINION = 1
STAGE_BIAS = 2
STAGE_LAMBDA = 3
STAGE_THETA = 4
STAGE_EPSILON = 5
STAGE_INIT = 99


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int = 1000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    lambda_max: int = 30
    bias_grid: int = 101
    epsilon_bounds: tuple[float, float] = (-20.0, 20.0)
    epsilon_grid: int = 201
    theta_bounds: tuple[float, float] = (-20.0, 20.0)
    theta_grid: int = 201
    lambda_mode: str = "blocked_joint"

    def __post_init__(self):
        object.__setattr__(self, "epsilon_bounds", tuple(float(x) for x in self.epsilon_bounds))
        object.__setattr__(self, "theta_bounds", tuple(float(x) for x in self.theta_bounds))
        if self.lambda_mode not in LAMBDA_MODES:
            raise ParameterDomainError(f"lambda_mode must be one of {LAMBDA_MODES}")
        if self.iterations < 1:
            raise ParameterDomainError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ParameterDomainError("burn_in must satisfy 0 <= burn_in < iterations")
        if not 1 <= self.thin <= self.iterations - self.burn_in:
            raise ParameterDomainError("thin must satisfy 1 <= thin <= iterations - burn_in")
        if self.seed < 0 or self.seed >= 2**64:
            raise ParameterDomainError("seed must be a 64-bit unsigned integer")
        if self.lambda_max < 1:
            raise ParameterDomainError("lambda_max must be positive")
        for name in ("bias_grid", "epsilon_grid", "theta_grid"):
            if getattr(self, name) < 2:
                raise ParameterDomainError(f"{name} must be >= 2")
        for name in ("epsilon_bounds", "theta_bounds"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ParameterDomainError(f"{name} must be a nonempty interval")

    @property
    def bias_values(self) -> np.ndarray:
        return grid_midpoints(0.0, 1.0, self.bias_grid)

    @property
    def epsilon_values(self) -> np.ndarray:
        return grid_midpoints(*self.epsilon_bounds, self.epsilon_grid)

    @property
    def theta_values(self) -> np.ndarray:
        return grid_midpoints(*self.theta_bounds, self.theta_grid)

    @property
    def num_retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilon_bounds"] = list(self.epsilon_bounds)
        d["theta_bounds"] = list(self.theta_bounds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        return cls(**d)


@dataclass
class GibbsState:
    """One full assignment of the latents; opinions align with the rating edges."""

    opinions: np.ndarray
    behaviors: np.ndarray
    biases: np.ndarray
    epsilon: float
    theta: np.ndarray
    iteration: int = 0

    def copy(self) -> "GibbsState":
        return GibbsState(
            self.opinions.copy(),
            self.behaviors.copy(),
            self.biases.copy(),
            float(self.epsilon),
            self.theta.copy(),
            int(self.iteration),
        )

    @property
    def lambdas(self) -> np.ndarray:
        return self.opinions.sum(axis=1)

    @property
    def logit(self) -> LogitParams:
        return LogitParams(self.epsilon, tuple(self.theta))

    def opinion_map(self, ratings: RatingMatrix) -> dict[tuple[int, int], Opinion]:
        return {
            edge: Opinion(*map(int, row)) for edge, row in zip(ratings.edges, self.opinions)
        }

    def expected_beliefs(self, ratings: RatingMatrix) -> np.ndarray:
        o = self.opinions
        return expected_belief_array(o[:, 0], o[:, 1], o[:, 2], self.biases[ratings.trustors])

    def check(self, ratings: RatingMatrix, lambda_max: int) -> None:
        """Raise if the state violates its invariants against ``ratings``."""
        if self.opinions.shape != (ratings.num_edges, 3):
            raise PreconditionError("opinions do not match the rating edges")
        if self.behaviors.shape != (ratings.num_trustees, 3):
            raise PreconditionError("one behavior per trustee required")
        if self.biases.shape != (ratings.num_trustors,):
            raise PreconditionError("one bias per trustor required")
        if self.theta.shape != (ratings.levels - 1,):
            raise PreconditionError("theta must have levels - 1 cutpoints")
        lam = self.lambdas
        if lam.size and (lam.min() < 1 or lam.max() > lambda_max or self.opinions.min() < 0):
            raise PreconditionError("opinion evidence totals must lie in [1, lambda_max]")


@dataclass
class Trace:
    samples: list[GibbsState]
    config: SamplerConfig
    ratings: RatingMatrix = field(repr=False)

    def __len__(self) -> int:
        return len(self.samples)


def stage_rng(seed: int, iteration: int, stage: int, sub: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, iteration, stage, sub])))


def categorical_from_log(logw: np.ndarray, u: float) -> int:
    """Index of the first cumulative weight strictly above ``u * total``."""
    logw = np.asarray(logw, dtype=float)
    top = logw.max()
    if not np.isfinite(top):
        raise ZeroNormalizerError("all conditional weights vanished")
    w = np.exp(logw - top)
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, u * cum[-1], side="right"))
    if idx >= w.size:
        idx = int(np.flatnonzero(w > 0)[-1])
    return idx


def _categorical_rows(logw: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.array([categorical_from_log(row, ui) for row, ui in zip(logw, u)], dtype=np.int64)


def _normalized(logw: np.ndarray) -> np.ndarray:
    z = logsumexp(logw)
    if not np.isfinite(z):
        raise ZeroNormalizerError("all conditional weights vanished")
    return logw - z


def _log_behaviors(behaviors: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(behaviors)


def _resolve_edge(edge, ratings: RatingMatrix) -> int:
    if isinstance(edge, (int, np.integer)):
        return int(edge)
    return ratings.edge_index(*edge)


# ------------------------------------------------------------------ opinions


def opinion_conditional_logpmf(edge, state: GibbsState, ratings: RatingMatrix):
    """Normalized log pmf of omega_ij over the compositions of its current lambda."""
    e = _resolve_edge(edge, ratings)
    lam = int(state.opinions[e].sum())
    table = composition_table(lam)
    sl = table.block(lam, lam)
    lw = kernels.edge_log_weights(
        table.alpha, table.beta, table.gamma, table.log_coef, table.offsets,
        lam, lam, int(ratings.ratings[e]),
        _log_behaviors(state.behaviors[ratings.trustees[e]]),
        float(state.biases[ratings.trustors[e]]), float(state.epsilon), state.theta,
    )
    support = np.stack((table.alpha[sl], table.beta[sl], table.gamma[sl]), axis=1)
    return support, _normalized(lw)


def joint_lambda_opinion_logpmf(edge, state: GibbsState, ratings: RatingMatrix, lambda_max: int):
    """Normalized log pmf of the block (lambda_ij, omega_ij), lambda uniform on [1, lambda_max]."""
    e = _resolve_edge(edge, ratings)
    table = composition_table(lambda_max)
    sl = table.block(1, lambda_max)
    lw = kernels.edge_log_weights(
        table.alpha, table.beta, table.gamma, table.log_coef, table.offsets,
        1, lambda_max, int(ratings.ratings[e]),
        _log_behaviors(state.behaviors[ratings.trustees[e]]),
        float(state.biases[ratings.trustors[e]]), float(state.epsilon), state.theta,
    )
    support = np.stack((table.alpha[sl], table.beta[sl], table.gamma[sl]), axis=1)
    return support, _normalized(lw)


def literal_lambda_logpmf(edge, state: GibbsState, ratings: RatingMatrix, lambda_max: int):
    """Lambda conditional exactly as derived with omega held fixed.

    ``P(omega | B, lambda)`` is zero unless ``lambda = alpha + beta + gamma``,
    so all mass sits on the current total and this move never changes lambda.
    """
    e = _resolve_edge(edge, ratings)
    omega = state.opinions[e]
    behavior = state.behaviors[ratings.trustees[e]]
    support = np.arange(1, lambda_max + 1)
    lw = np.array([
        multinomial_log_pmf(omega, behavior) if lam == omega.sum() else -np.inf
        for lam in support
    ])
    return support, _normalized(lw)


def sample_opinion_conditional(edge, state: GibbsState, ratings: RatingMatrix, rng) -> Opinion:
    support, logp = opinion_conditional_logpmf(edge, state, ratings)
    k = categorical_from_log(logp, rng.random())
    return Opinion(*map(int, support[k]))


def sample_lambda_conditional(
    edge, state: GibbsState, ratings: RatingMatrix, config: SamplerConfig, rng
) -> tuple[int, Opinion]:
    if config.lambda_mode == "fixed":
        raise PreconditionError("lambda is not sampled in fixed mode")
    e = _resolve_edge(edge, ratings)
    if config.lambda_mode == "paper_literal":
        support, logp = literal_lambda_logpmf(e, state, ratings, config.lambda_max)
        lam = int(support[categorical_from_log(logp, rng.random())])
        return lam, Opinion(*map(int, state.opinions[e]))
    support, logp = joint_lambda_opinion_logpmf(e, state, ratings, config.lambda_max)
    op = Opinion(*map(int, support[categorical_from_log(logp, rng.random())]))
    return op.lam, op


# ----------------------------------------------------------------- behaviors


def _column_counts(state: GibbsState, ratings: RatingMatrix) -> np.ndarray:
    counts = np.zeros((ratings.num_trustees, 3), dtype=np.int64)
    np.add.at(counts, ratings.trustees, state.opinions)
    return counts


def behavior_conditional_params(j: int, state: GibbsState, ratings: RatingMatrix) -> np.ndarray:
    """Dirichlet parameters ``1 + column sums of (alpha, beta, gamma)`` for trustee j."""
    if not np.any(ratings.trustees == j):
        raise PreconditionError(f"trustee {j} has no observed edges")
    return 1.0 + _column_counts(state, ratings)[j]


def sample_behavior_conditional(j: int, state: GibbsState, ratings: RatingMatrix, rng) -> Behavior:
    g = rng.standard_gamma(behavior_conditional_params(j, state, ratings))
    return Behavior.from_array(_to_simplex(g[None, :])[0])


def _to_simplex(g: np.ndarray) -> np.ndarray:
    out = g / g.sum(axis=1, keepdims=True)
    # absorb rounding so each row sums to 1 within the Behavior tolerance
    out[:, 2] = np.maximum(0.0, 1.0 - out[:, 0] - out[:, 1])
    return out


# ---------------------------------------------------------- grid conditionals


def _bias_log_weights(state: GibbsState, ratings: RatingMatrix, grid: np.ndarray) -> np.ndarray:
    """Unnormalized log weights, shape (num_trustors, len(grid)).

    Trustors without edges get flat weights (prior only).
    """
    o = state.opinions.astype(float)
    lam = o.sum(axis=1)
    x = (o[:, 0:1] + grid[None, :] * o[:, 2:3]) / lam[:, None]
    r = np.broadcast_to(ratings.ratings[:, None], x.shape)
    ll = kernels.logit_logpmf(state.epsilon * x, r, state.theta)
    out = np.zeros((ratings.num_trustors, grid.size))
    if ratings.num_edges:
        starts = np.flatnonzero(np.r_[True, np.diff(ratings.trustors) != 0])
        out[ratings.trustors[starts]] = np.add.reduceat(ll, starts, axis=0)
    return out


def bias_conditional_logpmf(i: int, state: GibbsState, ratings: RatingMatrix, config: SamplerConfig):
    if not np.any(ratings.trustors == i):
        raise PreconditionError(f"trustor {i} has no observed edges")
    grid = config.bias_values
    return grid, _normalized(_bias_log_weights(state, ratings, grid)[i])


def sample_bias_conditional(i: int, state: GibbsState, ratings: RatingMatrix, config: SamplerConfig, rng) -> float:
    grid, logp = bias_conditional_logpmf(i, state, ratings, config)
    return float(grid[categorical_from_log(logp, rng.random())])


def _epsilon_log_weights(state: GibbsState, ratings: RatingMatrix, grid: np.ndarray) -> np.ndarray:
    x = state.expected_beliefs(ratings)
    eta = grid[:, None] * x[None, :]
    r = np.broadcast_to(ratings.ratings[None, :], eta.shape)
    return kernels.logit_logpmf(eta, r, state.theta).sum(axis=1)


def epsilon_conditional_logpmf(state: GibbsState, ratings: RatingMatrix, config: SamplerConfig):
    if ratings.num_edges == 0:
        raise PreconditionError("epsilon conditional needs at least one observed edge")
    grid = config.epsilon_values
    return grid, _normalized(_epsilon_log_weights(state, ratings, grid))


def sample_epsilon_conditional(state: GibbsState, ratings: RatingMatrix, config: SamplerConfig, rng) -> float:
    grid, logp = epsilon_conditional_logpmf(state, ratings, config)
    return float(grid[categorical_from_log(logp, rng.random())])


def theta_window(l: int, theta: np.ndarray, bounds: tuple[float, float]) -> tuple[float, float]:
    """Open interval (theta_{l+1}, theta_{l-1}) for 1-based cutpoint l, sentinels at the bounds."""
    upper = bounds[1] if l == 1 else float(theta[l - 2])
    lower = bounds[0] if l == theta.size else float(theta[l])
    return lower, upper


def _theta_log_weights(l: int, state: GibbsState, ratings: RatingMatrix, grid: np.ndarray, bounds) -> np.ndarray:
    lower, upper = theta_window(l, state.theta, bounds)
    inside = (grid > lower) & (grid < upper)
    lw = np.full(grid.size, -np.inf)
    # only ratings l and l+1 involve theta_l
    sel = (ratings.ratings == l) | (ratings.ratings == l + 1)
    x = state.expected_beliefs(ratings)[sel]
    r = ratings.ratings[sel]
    eta = state.epsilon * x
    for g in np.flatnonzero(inside):
        theta = state.theta.copy()
        theta[l - 1] = grid[g]
        lw[g] = kernels.logit_logpmf(eta, r, theta).sum()
    return lw


def theta_conditional_logpmf(l: int, state: GibbsState, ratings: RatingMatrix, config: SamplerConfig):
    """Cutpoint ``l`` (1-based) restricted to grid points inside its ordering window."""
    if not 1 <= l <= ratings.levels - 1:
        raise PreconditionError(f"cutpoint index {l} outside 1..{ratings.levels - 1}")
    grid = config.theta_values
    lw = _theta_log_weights(l, state, ratings, grid, config.theta_bounds)
    if not np.isfinite(lw).any():
        lower, upper = theta_window(l, state.theta, config.theta_bounds)
        if not ((grid > lower) & (grid < upper)).any():
            raise EmptySupportError(f"no theta grid point inside ({lower}, {upper})")
    return grid, _normalized(lw)


def sample_theta_conditional(l: int, state: GibbsState, ratings: RatingMatrix, config: SamplerConfig, rng) -> float:
    grid, logp = theta_conditional_logpmf(l, state, ratings, config)
    return float(grid[categorical_from_log(logp, rng.random())])


# --------------------------------------------------------------------- sweep


def _sample_opinions_block(state, ratings, lo, hi, lambda_max, u):
    table = composition_table(lambda_max)
    out = state.opinions
    failed = kernels.sample_opinions(
        table.alpha, table.beta, table.gamma, table.log_coef, table.offsets,
        lo, hi, ratings.trustors, ratings.trustees, ratings.ratings,
        _log_behaviors(state.behaviors), state.biases, float(state.epsilon), state.theta,
        u, out, kernels.num_threads(),
    )
    if failed >= 0:
        raise ZeroNormalizerError(
            f"opinion weights vanished on edge {ratings.edges[failed]} at iteration {state.iteration}"
        )


def gibbs_step(
    state: GibbsState,
    ratings: RatingMatrix,
    config: SamplerConfig,
    update_log: list | None = None,
) -> GibbsState:
    """One sweep. Returns a new state; the input is left untouched.

    Randomness comes from ``config.seed`` and the successor iteration number.
    ``update_log``, when given, receives one entry per stage in execution order.
    """
    new = state.copy()
    t = new.iteration + 1
    new.iteration = t
    if ratings.num_edges == 0:
        return new
    seed = config.seed
    note = update_log.append if update_log is not None else (lambda _x: None)

    # B_j | O  ~  Dirichlet(1 + column sums)
    counts = _column_counts(new, ratings)
    g = stage_rng(seed, t, STAGE_BEHAVIOR).standard_gamma(1.0 + counts)
    new.behaviors = _to_simplex(g)
    note("B")

    # omega_ij | lambda_ij, B_j, a_i, theta, epsilon
    lam = new.lambdas
    u = stage_rng(seed, t, STAGE_OPINION).random(ratings.num_edges)
    _sample_opinions_block(new, ratings, lam, lam, max(config.lambda_max, int(lam.max())), u)
    note("O")

    # a_i on its grid
    grid = config.bias_values
    lw = _bias_log_weights(new, ratings, grid)
    u = stage_rng(seed, t, STAGE_BIAS).random(ratings.num_trustors)
    new.biases = grid[_categorical_rows(lw, u)]
    note("a")

    if config.lambda_mode != "fixed":
        u = stage_rng(seed, t, STAGE_LAMBDA).random(ratings.num_edges)
        if config.lambda_mode == "blocked_joint":
            ones = np.ones(ratings.num_edges, dtype=np.int64)
            _sample_opinions_block(new, ratings, ones, ones * config.lambda_max, config.lambda_max, u)
        else:
            for e in range(ratings.num_edges):
                support, logp = literal_lambda_logpmf(e, new, ratings, config.lambda_max)
                lam_e = int(support[categorical_from_log(logp, u[e])])
                if lam_e != int(new.opinions[e].sum()):  # pragma: no cover - degenerate by construction
                    raise AssertionError("literal lambda move changed lambda")
        note("lambda")

    tgrid = config.theta_values
    for l in range(1, ratings.levels):
        lw = _theta_log_weights(l, new, ratings, tgrid, config.theta_bounds)
        if not np.isfinite(lw).any():
            raise EmptySupportError(f"theta_{l} has no admissible grid point at iteration {t}")
        u = stage_rng(seed, t, STAGE_THETA, l).random()
        new.theta[l - 1] = tgrid[categorical_from_log(lw, u)]
        note(f"theta_{l}")

    egrid = config.epsilon_values
    lw = _epsilon_log_weights(new, ratings, egrid)
    u = stage_rng(seed, t, STAGE_EPSILON).random()
    new.epsilon = float(egrid[categorical_from_log(lw, u)])
    note("epsilon")
    return new


def initial_state(ratings: RatingMatrix, config: SamplerConfig) -> GibbsState:
    """Random draw from the priors (lambda from the data in fixed mode)."""
    rng = stage_rng(config.seed, 0, STAGE_INIT)
    E, M, N, L = ratings.num_edges, ratings.num_trustors, ratings.num_trustees, ratings.levels
    behaviors = _to_simplex(rng.standard_gamma(np.ones((N, 3))))
    biases = rng.choice(config.bias_values, size=M)
    if config.lambda_mode == "fixed":
        if ratings.lambdas is None:
            raise PreconditionError("fixed lambda mode needs known evidence totals per edge")
        lam = np.asarray(ratings.lambdas, dtype=np.int64)
        if lam.size and lam.max() > config.lambda_max:
            raise PreconditionError("known lambda exceeds lambda_max")
    else:
        lam = rng.integers(1, config.lambda_max + 1, size=E)
    # uniform composition of lambda: stars and bars
    opinions = np.zeros((E, 3), dtype=np.int64)
    for e in range(E):
        cuts = np.sort(rng.choice(int(lam[e]) + 2, size=2, replace=False))
        opinions[e] = (cuts[0], cuts[1] - cuts[0] - 1, int(lam[e]) + 1 - cuts[1])
    tvals = config.theta_values
    if tvals.size < L - 1:
        raise EmptySupportError("theta grid too coarse for strictly ordered cutpoints")
    theta = np.sort(rng.choice(tvals, size=L - 1, replace=False))[::-1].copy()
    epsilon = float(rng.choice(config.epsilon_values))
    return GibbsState(opinions, behaviors, biases, epsilon, theta, 0)


def gibbs_run(
    ratings: RatingMatrix,
    config: SamplerConfig,
    state: GibbsState | None = None,
    callback: Callable[[GibbsState], None] | None = None,
) -> Trace:
    """Run ``config.iterations`` sweeps; keep post burn-in states every ``thin``."""
    if ratings.num_edges == 0:
        raise PreconditionError("cannot run inference on an empty rating matrix")
    if state is None:
        state = initial_state(ratings, config)
    state.check(ratings, max(config.lambda_max, int(state.lambdas.max())))
    samples = []
    for _ in range(config.iterations):
        state = gibbs_step(state, ratings, config)
        t = state.iteration
        if t > config.burn_in and (t - config.burn_in) % config.thin == 0:
            samples.append(state)
        if callback is not None:
            callback(state)
    log.debug("gibbs_run finished %d sweeps, kept %d", config.iterations, len(samples))
    return Trace(samples, config, ratings)


# ---------------------------------------------------------------- summaries


@dataclass
class PosteriorSummary:
    edges: list[tuple[int, int]]
    alpha_mean: np.ndarray
    beta_mean: np.ndarray
    gamma_mean: np.ndarray
    lambda_mean: np.ndarray
    expected_belief_mean: np.ndarray
    expected_belief_ci90: np.ndarray
    rounded_opinions: np.ndarray
    edge_bias_mean: np.ndarray
    behaviors_mean: np.ndarray
    biases_mean: np.ndarray
    epsilon_mean: float
    theta_mean: np.ndarray
    num_samples: int


def round_opinion(alpha: float, beta: float, gamma: float, lam: float) -> tuple[int, int, int]:
    """Composition of ``round(lam)`` closest to the mean counts (largest remainder)."""
    total = max(1, int(np.floor(lam + 0.5)))
    means = np.array([alpha, beta, gamma], dtype=float)
    s = means.sum()
    target = means * (total / s) if s > 0 else np.full(3, total / 3.0)
    base = np.floor(target).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(target - base), kind="stable")
    base[order[:short]] += 1
    return tuple(int(x) for x in base)


def summarize_posterior(trace: Trace) -> PosteriorSummary:
    if len(trace) == 0:
        raise PreconditionError("cannot summarize an empty trace")
    ratings = trace.ratings
    ops = np.stack([s.opinions for s in trace.samples]).astype(float)  # (S, E, 3)
    biases = np.stack([s.biases for s in trace.samples])
    eb = np.stack([s.expected_beliefs(ratings) for s in trace.samples])
    m = ops.mean(axis=0)
    lam_mean = ops.sum(axis=2).mean(axis=0)
    rounded = np.array(
        [round_opinion(a, b, g, lm) for (a, b, g), lm in zip(m, lam_mean)], dtype=np.int64
    ).reshape(-1, 3)
    bias_mean = biases.mean(axis=0)
    return PosteriorSummary(
        edges=ratings.edges,
        alpha_mean=m[:, 0],
        beta_mean=m[:, 1],
        gamma_mean=m[:, 2],
        lambda_mean=lam_mean,
        expected_belief_mean=eb.mean(axis=0),
        expected_belief_ci90=np.quantile(eb, [0.05, 0.95], axis=0).T.copy(),
        rounded_opinions=rounded,
        edge_bias_mean=bias_mean[ratings.trustors],
        behaviors_mean=np.stack([s.behaviors for s in trace.samples]).mean(axis=0),
        biases_mean=bias_mean,
        epsilon_mean=float(np.mean([s.epsilon for s in trace.samples])),
        theta_mean=np.stack([s.theta for s in trace.samples]).mean(axis=0),
        num_samples=len(trace),
    )
