"""Compiled vs numpy kernels on a desk-scale instance (30 x 20, L = 4, lambda_max 30).

    python3 benchmarks/bench_kernels.py [--repeat 5] [--threads 1]

Reports the best wall time per call for the opinion kernels and for a full
sweep in each lambda mode, and checks that both backends draw identical states.
"""
from __future__ import annotations

import argparse
import os
import time
from contextlib import contextmanager

import numpy as np

from opinionforge import _pykernels, kernels
from opinionforge.generative import forward_generate_network, random_truth
from opinionforge.inference import SamplerConfig, gibbs_step, initial_state
from opinionforge.model import LogitParams, composition_table

try:
    from opinionforge import _ckernels
except ImportError:  # extension not built
    _ckernels = None


@contextmanager
def backend(module):
    saved = {name: getattr(kernels, name) for name in ("logit_logpmf", "edge_log_weights", "sample_opinions")}
    for name in saved:
        setattr(kernels, name, getattr(module, name))
    try:
        yield
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, default=1, help="OPINIONFORGE_THREADS for the compiled kernel")
    args = ap.parse_args()
    os.environ["OPINIONFORGE_THREADS"] = str(args.threads)

    truth = random_truth(30, 20, LogitParams(6.0, (1.5, -1.0, -3.5)), np.random.default_rng(0), (1, 30))
    ratings, _ = forward_generate_network(truth, 0)
    table = composition_table(30)
    configs = {
        mode: SamplerConfig(iterations=1, seed=0, lambda_max=30, epsilon_bounds=(0.0, 20.0), lambda_mode=mode)
        for mode in ("fixed", "blocked_joint")
    }
    state = initial_state(ratings, configs["blocked_joint"])
    u = np.random.default_rng(1).random(ratings.num_edges)
    ones = np.ones(ratings.num_edges, dtype=np.int64)
    log_b = np.log(state.behaviors)

    def opinion_kernel(module, lo, hi):
        out = state.opinions.copy()
        module.sample_opinions(
            table.alpha, table.beta, table.gamma, table.log_coef, table.offsets,
            lo, hi, ratings.trustors, ratings.trustees, ratings.ratings,
            log_b, state.biases, state.epsilon, state.theta, u, out, args.threads,
        )
        return out

    backends = [("numpy", _pykernels)] + ([("cython", _ckernels)] if _ckernels is not None else [])
    lam = state.lambdas
    cases = {
        "opinions, lambda fixed": lambda m: opinion_kernel(m, lam, lam),
        "opinions, lambda 1..30": lambda m: opinion_kernel(m, ones, ones * 30),
    }
    for mode, cfg in configs.items():
        cases[f"full sweep, {mode}"] = lambda m, cfg=cfg: _sweep(m, state, ratings, cfg)

    print(f"{ratings.num_edges} edges, {table.alpha.size} compositions, threads={args.threads}")
    print(f"{'case':28s}" + "".join(f"{name:>12s}" for name, _ in backends) + ("     speedup" if len(backends) == 2 else ""))
    for label, fn in cases.items():
        row = [best_of(lambda: fn(module), args.repeat) for _, module in backends]
        line = f"{label:28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in row)
        if len(row) == 2:
            line += f"{row[0] / row[1]:11.1f}x"
        print(line)

    if len(backends) == 2:
        same = np.array_equal(opinion_kernel(_pykernels, ones, ones * 30), opinion_kernel(_ckernels, ones, ones * 30))
        a, b = (_sweep(m, state, ratings, configs["blocked_joint"]) for m in (_pykernels, _ckernels))
        same = same and np.array_equal(a.opinions, b.opinions) and a.epsilon == b.epsilon
        print(f"backends agree: {same}")


def _sweep(module, state, ratings, cfg):
    with backend(module):
        return gibbs_step(state, ratings, cfg)


if __name__ == "__main__":
    main()
