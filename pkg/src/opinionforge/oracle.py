"""Brute-force posterior for toy instances.

The joint is evaluated directly from the core-model kernels, without going
through any sampler code, so it can serve as ground truth for the sampler.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InstanceTooLargeError, ParameterDomainError, PreconditionError
from .model import (
    RatingMatrix,
    composition_table,
    dirichlet_log_pdf,
    enumerate_compositions,
    expected_belief,
    expected_belief_array,
    grid_midpoints,
    logsumexp,
    multinomial_log_pmf,
    ordered_logit_logpmf,
    simplex_lattice,
)

MAX_STATES = 10**8


@dataclass(frozen=True)
class OracleConfig:
    """Discretisation of the toy posterior.

    ``behavior_grid = 0`` integrates each behavior out in closed form
    (Dirichlet-multinomial); a positive value uses the barycentric lattice
    with that many subdivisions per simplex edge.
    """

    lambda_max: int = 3
    bias_grid: int = 3
    epsilon_grid: int = 3
    theta_grid: int = 3
    behavior_grid: int = 0
    epsilon_bounds: tuple[float, float] = (-20.0, 20.0)
    theta_bounds: tuple[float, float] = (-20.0, 20.0)
    lambda_mode: str = "blocked_joint"
    max_states: int = MAX_STATES

    def __post_init__(self):
        object.__setattr__(self, "epsilon_bounds", tuple(float(x) for x in self.epsilon_bounds))
        object.__setattr__(self, "theta_bounds", tuple(float(x) for x in self.theta_bounds))
        if not 1 <= self.lambda_max <= 4:
            raise ParameterDomainError("oracle lambda_max must lie in 1..4")
        for name in ("bias_grid", "epsilon_grid", "theta_grid"):
            if not 1 <= getattr(self, name) <= 11:
                raise ParameterDomainError(f"oracle {name} must lie in 1..11")
        if not 0 <= self.behavior_grid <= 10:
            raise ParameterDomainError("oracle behavior_grid must lie in 0..10")
        if self.lambda_mode not in ("fixed", "blocked_joint"):
            raise ParameterDomainError("oracle enumerates lambda (blocked_joint) or takes it as known (fixed)")
        if self.max_states > MAX_STATES:
            raise ParameterDomainError(f"max_states is capped at {MAX_STATES}")

    @classmethod
    def from_sampler_config(cls, cfg, behavior_grid: int = 0) -> "OracleConfig":
        mode = "fixed" if cfg.lambda_mode == "fixed" else "blocked_joint"
        return cls(
            lambda_max=cfg.lambda_max, bias_grid=cfg.bias_grid, epsilon_grid=cfg.epsilon_grid,
            theta_grid=cfg.theta_grid, behavior_grid=behavior_grid,
            epsilon_bounds=cfg.epsilon_bounds, theta_bounds=cfg.theta_bounds, lambda_mode=mode,
        )

    @property
    def bias_values(self):
        return grid_midpoints(0.0, 1.0, self.bias_grid)

    @property
    def epsilon_values(self):
        return grid_midpoints(*self.epsilon_bounds, self.epsilon_grid)

    @property
    def theta_values(self):
        return grid_midpoints(*self.theta_bounds, self.theta_grid)


def ordered_theta_combos(values: np.ndarray, count: int) -> np.ndarray:
    """All strictly decreasing ``count``-tuples drawn from ``values``."""
    desc = np.sort(np.asarray(values, dtype=float))[::-1]
    combos = list(itertools.combinations(desc, count))
    return np.array(combos, dtype=float).reshape(len(combos), count)


def log_joint(
    state,
    ratings: RatingMatrix,
    lambda_max: int,
    lambdas: np.ndarray | None = None,
) -> float:
    """``log P(R, O, a, B, lambda, theta, epsilon)`` up to the flat-prior constants.

    Priors: Dirichlet(1,1,1) on each behavior, uniform bias, uniform lambda on
    ``[1, lambda_max]``, flat epsilon and strictly decreasing theta.
    """
    theta = np.asarray(state.theta, dtype=float)
    if np.any(np.diff(theta) >= 0):
        return -np.inf
    if np.any((state.biases < 0) | (state.biases > 1)):
        return -np.inf
    lam = state.opinions.sum(axis=1) if lambdas is None else np.asarray(lambdas)
    total = 0.0
    for e, (i, j, r) in enumerate(zip(ratings.trustors, ratings.trustees, ratings.ratings)):
        op = tuple(int(c) for c in state.opinions[e])
        if not 1 <= lam[e] <= lambda_max or sum(op) != lam[e] or min(op) < 0:
            return -np.inf
        total += multinomial_log_pmf(op, state.behaviors[j])
        x = expected_belief(op, float(state.biases[i]))
        total += float(ordered_logit_logpmf(state.epsilon * x, theta, int(r)))
    for j in range(ratings.num_trustees):
        total += dirichlet_log_pdf(state.behaviors[j], (1, 1, 1))
    return float(total)


def _target_support(target, state, ratings, cfg, lattice):
    kind = target[0]
    if kind == "opinion":
        lam = int(state.opinions[target[1]].sum())
        return np.array(enumerate_compositions(lam), dtype=np.int64)
    if kind == "lambda_opinion":
        t = composition_table(cfg.lambda_max)
        sl = t.block(1, cfg.lambda_max)
        return np.stack((t.alpha[sl], t.beta[sl], t.gamma[sl]), axis=1)
    if kind == "lambda":
        return np.arange(1, cfg.lambda_max + 1)
    if kind == "behavior":
        if lattice is None:
            raise PreconditionError("behavior target needs a simplex lattice")
        return lattice
    if kind == "bias":
        return cfg.bias_values
    if kind == "epsilon":
        return cfg.epsilon_values
    if kind == "theta":
        return cfg.theta_values
    raise ParameterDomainError(f"unknown target {target!r}")


def conditional_pmf_oracle(target, state, ratings: RatingMatrix, cfg, lattice: np.ndarray | None = None):
    """Bayes quotient of one latent given the rest, by evaluating the joint at every support point.

    ``target`` is one of ``("opinion", e)``, ``("lambda_opinion", e)``,
    ``("lambda", e)``, ``("behavior", j)``, ``("bias", i)``, ``("epsilon",)``,
    ``("theta", l)`` with ``l`` 1-based. ``cfg`` supplies grids and lambda_max
    (a SamplerConfig or OracleConfig).
    Returns ``(support, pmf)``.
    """
    support = _target_support(target, state, ratings, cfg, lattice)
    kind = target[0]
    logw = np.empty(len(support))
    for k, value in enumerate(support):
        s = state.copy()
        lambdas = None
        if kind in ("opinion", "lambda_opinion"):
            s.opinions[target[1]] = value
        elif kind == "lambda":
            lambdas = s.opinions.sum(axis=1)
            lambdas[target[1]] = value
        elif kind == "behavior":
            s.behaviors[target[1]] = value
        elif kind == "bias":
            s.biases[target[1]] = value
        elif kind == "epsilon":
            s.epsilon = float(value)
        elif kind == "theta":
            s.theta[target[1] - 1] = value
        logw[k] = log_joint(s, ratings, cfg.lambda_max, lambdas)
    z = logsumexp(logw)
    return support, np.exp(logw - z)


# ------------------------------------------------------- full enumeration


@dataclass
class ExactPosterior:
    edges: list[tuple[int, int]]
    omega_support: list[np.ndarray]
    omega_marginals: list[np.ndarray]
    expected_belief_mean: np.ndarray
    bias_values: np.ndarray
    bias_marginals: np.ndarray
    epsilon_values: np.ndarray
    epsilon_marginal: np.ndarray
    theta_combos: np.ndarray
    theta_marginal: np.ndarray
    behavior_means: np.ndarray
    num_states: int
    log_normalizer: float = field(default=0.0)

    @property
    def theta_means(self) -> np.ndarray:
        return self.theta_marginal @ self.theta_combos

    @property
    def epsilon_mean(self) -> float:
        return float(self.epsilon_marginal @ self.epsilon_values)

    def to_dict(self) -> dict:
        return {
            "edges": [list(e) for e in self.edges],
            "omega_support": [s.tolist() for s in self.omega_support],
            "omega_marginals": [m.tolist() for m in self.omega_marginals],
            "expected_belief_mean": self.expected_belief_mean.tolist(),
            "bias_values": self.bias_values.tolist(),
            "bias_marginals": self.bias_marginals.tolist(),
            "epsilon_values": self.epsilon_values.tolist(),
            "epsilon_marginal": self.epsilon_marginal.tolist(),
            "theta_combos": self.theta_combos.tolist(),
            "theta_marginal": self.theta_marginal.tolist(),
            "theta_means": self.theta_means.tolist(),
            "behavior_means": self.behavior_means.tolist(),
            "num_states": self.num_states,
            "log_normalizer": self.log_normalizer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExactPosterior":
        return cls(
            edges=[tuple(e) for e in d["edges"]],
            omega_support=[np.array(s, dtype=np.int64).reshape(-1, 3) for s in d["omega_support"]],
            omega_marginals=[np.array(m) for m in d["omega_marginals"]],
            expected_belief_mean=np.array(d["expected_belief_mean"]),
            bias_values=np.array(d["bias_values"]),
            bias_marginals=np.array(d["bias_marginals"]),
            epsilon_values=np.array(d["epsilon_values"]),
            epsilon_marginal=np.array(d["epsilon_marginal"]),
            theta_combos=np.array(d["theta_combos"]).reshape(len(d["theta_combos"]), -1),
            theta_marginal=np.array(d["theta_marginal"]),
            behavior_means=np.array(d["behavior_means"]),
            num_states=int(d["num_states"]),
            log_normalizer=float(d["log_normalizer"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


class _Space:
    """Named axes of the enumerated product space plus broadcastable log terms."""

    def __init__(self, axes: list[tuple], sizes: dict):
        self.axes = axes
        self.pos = {a: k for k, a in enumerate(axes)}
        self.shape = tuple(sizes[a] for a in axes)
        self.terms: list[np.ndarray] = []

    def add(self, arr: np.ndarray, axes: list[tuple]) -> None:
        order = sorted(range(len(axes)), key=lambda k: self.pos[axes[k]])
        arr = np.transpose(arr, order)
        shape = [1] * len(self.axes)
        for k in order:
            shape[self.pos[axes[k]]] = arr.shape[order.index(k)]
        self.terms.append(arr.reshape(shape))

    def chunk(self, k: int) -> np.ndarray:
        out = np.zeros((1,) + self.shape[1:])
        for t in self.terms:
            out = out + (t[k : k + 1] if t.shape[0] > 1 else t)
        return out


def _omega_supports(ratings: RatingMatrix, cfg: OracleConfig) -> list[np.ndarray]:
    if cfg.lambda_mode == "fixed":
        if ratings.lambdas is None:
            raise PreconditionError("fixed-lambda oracle needs known lambdas")
        if ratings.lambdas.max() > cfg.lambda_max:
            raise PreconditionError("known lambda exceeds oracle lambda_max")
        return [np.array(enumerate_compositions(int(l)), dtype=np.int64) for l in ratings.lambdas]
    t = composition_table(cfg.lambda_max)
    sl = t.block(1, cfg.lambda_max)
    block = np.stack((t.alpha[sl], t.beta[sl], t.gamma[sl]), axis=1)
    return [block.copy() for _ in range(ratings.num_edges)]


def count_states(ratings: RatingMatrix, cfg: OracleConfig) -> int:
    supports = _omega_supports(ratings, cfg)
    combos = len(ordered_theta_combos(cfg.theta_values, ratings.levels - 1))
    n = combos * cfg.epsilon_grid * cfg.bias_grid ** ratings.num_trustors
    for s in supports:
        n *= len(s)
    if cfg.behavior_grid:
        n *= len(simplex_lattice(cfg.behavior_grid)) ** ratings.num_trustees
    return int(n)


def exact_posterior(ratings: RatingMatrix, cfg: OracleConfig, order: str = "omega_inner") -> ExactPosterior:
    """Enumerate the discretised joint and return exact marginals.

    ``order`` picks whether opinion axes vary fastest (``omega_inner``) or
    slowest (``omega_outer``); both must give the same answer.
    """
    if ratings.num_edges == 0:
        raise PreconditionError("oracle needs at least one observed edge")
    n_states = count_states(ratings, cfg)
    if n_states > cfg.max_states:
        raise InstanceTooLargeError(f"{n_states} joint states exceed the cap of {cfg.max_states}")

    E, M, N, L = ratings.num_edges, ratings.num_trustors, ratings.num_trustees, ratings.levels
    supports = _omega_supports(ratings, cfg)
    bias_vals = cfg.bias_values
    eps_vals = cfg.epsilon_values
    combos = ordered_theta_combos(cfg.theta_values, L - 1)
    if len(combos) == 0:
        raise PreconditionError("theta grid has fewer points than cutpoints")
    lattice = simplex_lattice(cfg.behavior_grid) if cfg.behavior_grid else None

    omega_axes = [("omega", e) for e in range(E)]
    rest = [("theta",), ("epsilon",)] + [("bias", i) for i in range(M)]
    if lattice is not None:
        rest += [("behavior", j) for j in range(N)]
    axes = rest + omega_axes if order == "omega_inner" else omega_axes + rest[::-1]
    if order not in ("omega_inner", "omega_outer"):
        raise ParameterDomainError("order must be omega_inner or omega_outer")
    sizes = {("theta",): len(combos), ("epsilon",): len(eps_vals)}
    sizes.update({("omega", e): len(supports[e]) for e in range(E)})
    sizes.update({("bias", i): len(bias_vals) for i in range(M)})
    if lattice is not None:
        sizes.update({("behavior", j): len(lattice) for j in range(N)})
    space = _Space(axes, sizes)

    for e in range(E):
        i, j, r = int(ratings.trustors[e]), int(ratings.trustees[e]), int(ratings.ratings[e])
        s = supports[e]
        x = expected_belief_array(s[:, 0, None], s[:, 1, None], s[:, 2, None], bias_vals[None, :])
        eta = eps_vals[None, None, :, None] * x[:, :, None, None]
        th = combos[None, None, None, :, :]
        space.add(ordered_logit_logpmf(eta, th, r), [("omega", e), ("bias", i), ("epsilon",), ("theta",)])
        if lattice is not None:
            mul = np.array([[multinomial_log_pmf(op, p) for p in lattice] for op in s])
            space.add(mul, [("omega", e), ("behavior", j)])
    if lattice is None:
        # integrate B_j against Dirichlet(1,1,1): 2 * prod Gamma(1 + S_k) / Gamma(3 + sum S)
        for j in range(N):
            col = [e for e in range(E) if ratings.trustees[e] == j]
            if not col:
                continue
            grids = np.meshgrid(*[np.arange(len(supports[e])) for e in col], indexing="ij")
            sums = np.zeros(grids[0].shape + (3,))
            coef = np.zeros(grids[0].shape)
            for e, g in zip(col, grids):
                s = supports[e][g]
                sums += s
                coef += gammaln(s.sum(-1) + 1.0) - gammaln(s + 1.0).sum(-1)
            term = coef + np.log(2.0) + gammaln(1.0 + sums).sum(-1) - gammaln(3.0 + sums.sum(-1))
            space.add(term, [("omega", e) for e in col])
    else:
        for j in range(N):
            prior = np.array([dirichlet_log_pdf(p, (1, 1, 1)) for p in lattice])
            space.add(prior, [("behavior", j)])

    # pass 1: normaliser, merged over first-axis shards in order
    shard_z = np.array([logsumexp(space.chunk(k)) for k in range(space.shape[0])])
    log_z = float(logsumexp(shard_z))

    keep = {a: np.zeros(sizes[a]) for a in axes}
    pair = {e: np.zeros((len(supports[e]), len(bias_vals))) for e in range(E)}
    col_means = np.zeros((N, 3))
    for k in range(space.shape[0]):
        p = np.exp(space.chunk(k) - log_z)
        for a in axes:
            ax = space.pos[a]
            others = tuple(x for x in range(len(axes)) if x != ax)
            m = p.sum(axis=others)
            if ax == 0:
                keep[a][k] += m[0]
            else:
                keep[a] += m
        for e in range(E):
            ae, ab = space.pos[("omega", e)], space.pos[("bias", int(ratings.trustors[e]))]
            others = tuple(x for x in range(len(axes)) if x not in (ae, ab))
            m = p.sum(axis=others)
            if ae > ab:
                m = m.T
            if 0 in (ae, ab):
                if ae == 0:
                    pair[e][k] += m[0]
                else:
                    pair[e][:, k] += m[:, 0]
            else:
                pair[e] += m
        if lattice is None:
            for j in range(N):
                col = [e for e in range(E) if ratings.trustees[e] == j]
                if not col:
                    col_means[j] += p.sum() * np.full(3, 1.0 / 3.0)
                    continue
                pos = [space.pos[("omega", e)] for e in col]
                others = tuple(x for x in range(len(axes)) if x not in pos)
                m = p.sum(axis=others)  # axes in increasing position order
                col_sorted = [e for _, e in sorted(zip(pos, col))]
                grids = np.meshgrid(*[np.arange(s) for s in m.shape], indexing="ij")
                sums = np.zeros(m.shape + (3,))
                for e, g in zip(col_sorted, grids):
                    sums += supports[e][k if space.pos[("omega", e)] == 0 else g]
                post = (1.0 + sums) / (3.0 + sums.sum(-1, keepdims=True))
                col_means[j] += (m[..., None] * post).reshape(-1, 3).sum(0)

    eb_mean = np.zeros(E)
    for e in range(E):
        s = supports[e]
        x = expected_belief_array(s[:, 0, None], s[:, 1, None], s[:, 2, None], bias_vals[None, :])
        eb_mean[e] = float((pair[e] * x).sum())
    if lattice is not None:
        behavior_means = np.stack([keep[("behavior", j)] @ lattice for j in range(N)])
    else:
        behavior_means = col_means
    return ExactPosterior(
        edges=ratings.edges,
        omega_support=supports,
        omega_marginals=[keep[("omega", e)] for e in range(E)],
        expected_belief_mean=eb_mean,
        bias_values=bias_vals,
        bias_marginals=np.stack([keep[("bias", i)] for i in range(M)]),
        epsilon_values=eps_vals,
        epsilon_marginal=keep[("epsilon",)],
        theta_combos=combos,
        theta_marginal=keep[("theta",)],
        behavior_means=behavior_means,
        num_states=n_states,
        log_normalizer=log_z,
    )
