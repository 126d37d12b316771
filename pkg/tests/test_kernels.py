import os
import subprocess
import sys

import numpy as np
import pytest

from opinionforge import _pykernels, kernels
from opinionforge.model import composition_table, ordered_logit_logpmf

ck = pytest.importorskip("opinionforge._ckernels")


def _random_problem(rng, E=200, M=7, N=5, L=4, lambda_max=12):
    theta = np.sort(rng.uniform(-4, 4, L - 1))[::-1].copy()
    return dict(
        trustors=rng.integers(0, M, E),
        trustees=rng.integers(0, N, E),
        ratings=rng.integers(1, L + 1, E),
        behaviors=rng.dirichlet(np.ones(3), N),
        biases=rng.random(M),
        epsilon=float(rng.uniform(-8, 8)),
        theta=theta,
        table=composition_table(lambda_max),
        lambda_max=lambda_max,
    )


def test_logit_logpmf_three_ways():
    rng = np.random.default_rng(1)
    theta = np.array([2.0, 0.5, -1.0, -3.0])
    eta = rng.normal(0, 20, 5000)
    r = rng.integers(1, 6, 5000)
    ref = ordered_logit_logpmf(eta, theta, r)
    np.testing.assert_allclose(_pykernels.logit_logpmf(eta, r, theta), ref, rtol=1e-13, atol=1e-300)
    np.testing.assert_allclose(ck.logit_logpmf(eta, r, theta), ref, rtol=1e-13, atol=1e-300)


def test_edge_log_weights_agree():
    rng = np.random.default_rng(2)
    p = _random_problem(rng)
    t = p["table"]
    for lo, hi in [(1, 12), (5, 5), (1, 1)]:
        args = (t.alpha, t.beta, t.gamma, t.log_coef, t.offsets, lo, hi, 3,
                np.log(p["behaviors"][0]), 0.3, p["epsilon"], p["theta"])
        np.testing.assert_allclose(ck.edge_log_weights(*args), _pykernels.edge_log_weights(*args), rtol=1e-12)


def test_edge_log_weights_zero_probability_category():
    t = composition_table(3)
    with np.errstate(divide="ignore"):
        lb = np.log(np.array([1.0, 0.0, 0.0]))
    args = (t.alpha, t.beta, t.gamma, t.log_coef, t.offsets, 3, 3, 2, lb, 0.5, 1.0, np.array([0.0]))
    for impl in (ck, _pykernels):
        w = impl.edge_log_weights(*args)
        assert np.isfinite(w[0]) and np.all(np.isneginf(w[1:]))


@pytest.mark.parametrize("threads", [1, 3])
def test_sample_opinions_identical_draws(threads):
    rng = np.random.default_rng(3)
    p = _random_problem(rng, E=500)
    t = p["table"]
    E = p["ratings"].size
    lo = rng.integers(1, 6, E)
    hi = np.where(rng.random(E) < 0.5, lo, p["lambda_max"])
    u = rng.random(E)
    outs = []
    for impl in (ck, _pykernels):
        out = np.zeros((E, 3), dtype=np.int64)
        rc = impl.sample_opinions(
            t.alpha, t.beta, t.gamma, t.log_coef, t.offsets, lo, hi,
            p["trustors"], p["trustees"], p["ratings"], np.log(p["behaviors"]), p["biases"],
            p["epsilon"], p["theta"], u, out, threads,
        )
        assert rc == -1
        outs.append(out)
    np.testing.assert_array_equal(outs[0], outs[1])
    lam = outs[0].sum(1)
    assert np.all((lam >= lo) & (lam <= hi))


def test_sample_opinions_reports_vanished_edge():
    t = composition_table(2)
    with np.errstate(divide="ignore"):
        lb = np.log(np.array([[0.2, 0.3, 0.5], [0.0, 0.0, 0.0]]))
    for impl in (ck, _pykernels):
        out = np.zeros((3, 3), dtype=np.int64)
        rc = impl.sample_opinions(
            t.alpha, t.beta, t.gamma, t.log_coef, t.offsets, np.full(3, 2), np.full(3, 2),
            np.zeros(3, dtype=np.int64), np.array([0, 1, 1]), np.array([1, 2, 2]), lb, np.array([0.5]),
            1.0, np.array([0.0]), np.full(3, 0.5), out, 1,
        )
        assert rc == 1


def test_inversion_boundary_uniforms():
    t = composition_table(2)
    lb = np.log(np.full((1, 3), 1 / 3))
    for u in (0.0, np.nextafter(1.0, 0.0)):
        res = []
        for impl in (ck, _pykernels):
            out = np.zeros((1, 3), dtype=np.int64)
            impl.sample_opinions(
                t.alpha, t.beta, t.gamma, t.log_coef, t.offsets, np.array([2]), np.array([2]),
                np.array([0]), np.array([0]), np.array([1]), lb, np.array([0.5]),
                0.0, np.array([0.0]), np.array([u]), out, 1,
            )
            res.append(tuple(out[0]))
        assert res[0] == res[1]
    assert res[0] == (0, 0, 2)


def test_backend_selection_reports_name():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.num_threads() >= 1


@pytest.mark.parametrize("value, expected", [("python", "python"), ("numpy", "python")])
def test_backend_override_at_import(value, expected):
    env = dict(os.environ, OPINIONFORGE_BACKEND=value)
    out = subprocess.run(
        [sys.executable, "-c", "from opinionforge import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == expected
