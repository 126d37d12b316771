"""Numpy implementation of the hot kernels.

Mirrors ``_ckernels.pyx`` function for function and uses the same floating
point formulas, so the two backends agree to rounding.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

_LN2 = np.log(2.0)
_CHUNK = 1 << 20  # max weight-matrix entries materialised at once


def _softplus(x):
    with np.errstate(over="ignore"):
        return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(np.minimum(x, 0.0))))


def _log1mexp(d):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d > -_LN2, np.log(-np.expm1(d)), np.log1p(-np.exp(d)))


def _logit_logpmf(eta, rating, theta):
    """Elementwise log P(y = rating | eta); theta is the 1-d cutpoint vector."""
    levels = theta.shape[0] + 1
    padded = np.empty(levels + 1)
    padded[0] = np.inf
    padded[1:-1] = theta
    padded[-1] = -np.inf
    u = eta + padded[rating - 1]
    v = eta + padded[rating]
    top = rating == 1
    bottom = rating == levels
    with np.errstate(invalid="ignore"):
        mid = -_softplus(-u) - _softplus(v) + _log1mexp(v - u)
    out = np.where(top, -_softplus(v), np.where(bottom, -_softplus(-u), mid))
    return out


def logit_logpmf(eta, rating, theta):
    eta = np.ascontiguousarray(eta, dtype=np.float64)
    rating = np.ascontiguousarray(rating, dtype=np.int64)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    return _logit_logpmf(eta, rating, theta)


def _block_log_weights(alpha, beta, gamma, log_coef, rating, log_b, bias, epsilon, theta):
    """Log weights for a batch of edges over one shared composition block.

    ``rating``, ``log_b`` (k, 3) and ``bias`` are per edge; result is (k, K).
    """
    lam = (alpha + beta + gamma).astype(np.float64)
    x = (alpha[None, :] + bias[:, None] * gamma[None, :]) / lam[None, :]
    r = np.broadcast_to(rating[:, None], x.shape)
    lw = _logit_logpmf(epsilon * x, r, theta)
    lw = lw + log_coef[None, :]
    for k, cnt in enumerate((alpha, beta, gamma)):
        with np.errstate(invalid="ignore"):
            term = cnt[None, :] * log_b[:, k : k + 1]
        lw = lw + np.where(cnt[None, :] > 0, term, 0.0)
    return lw


def edge_log_weights(
    comp_alpha, comp_beta, comp_gamma, comp_log_coef, offsets,
    lam_lo, lam_hi, rating, log_behavior, bias, epsilon, theta,
):
    sl = slice(int(offsets[lam_lo]), int(offsets[lam_hi + 1]))
    lw = _block_log_weights(
        comp_alpha[sl], comp_beta[sl], comp_gamma[sl], comp_log_coef[sl],
        np.array([rating], dtype=np.int64),
        np.asarray(log_behavior, dtype=np.float64).reshape(1, 3),
        np.array([bias], dtype=np.float64),
        float(epsilon),
        np.ascontiguousarray(theta, dtype=np.float64),
    )
    return lw[0]


def _invert_rows(lw, uniforms):
    """Categorical draw per row by cumulative-sum inversion (first cum > u * total)."""
    top = lw.max(axis=1)
    bad = ~np.isfinite(top)
    w = np.exp(lw - np.where(bad, 0.0, top)[:, None])
    cum = np.cumsum(w, axis=1)
    target = uniforms * cum[:, -1]
    hit = cum > target[:, None]
    idx = hit.argmax(axis=1)
    miss = ~hit.any(axis=1) & ~bad
    if miss.any():
        # u * total rounded up to total: take the last positive-weight entry
        last = w.shape[1] - 1 - (w[:, ::-1] > 0).argmax(axis=1)
        idx = np.where(miss, last, idx)
    return idx, bad


def sample_opinions(
    comp_alpha, comp_beta, comp_gamma, comp_log_coef, offsets,
    lam_lo, lam_hi, trustors, trustees, ratings,
    log_behaviors, biases, epsilon, theta, uniforms, out, num_threads=1,
):
    """Draw one composition per edge in place into ``out`` (E, 3).

    Returns -1 on success or the index of the first edge whose weights all
    vanished.
    """
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    lam_lo = np.asarray(lam_lo)
    lam_hi = np.asarray(lam_hi)
    failed = -1
    keys = lam_lo * (offsets.shape[0] + 1) + lam_hi
    for key in np.unique(keys):
        edges = np.flatnonzero(keys == key)
        lo, hi = int(lam_lo[edges[0]]), int(lam_hi[edges[0]])
        sl = slice(int(offsets[lo]), int(offsets[hi + 1]))
        a, b, g, c = comp_alpha[sl], comp_beta[sl], comp_gamma[sl], comp_log_coef[sl]
        step = max(1, _CHUNK // max(1, a.shape[0]))
        for start in range(0, edges.shape[0], step):
            e = edges[start : start + step]
            lw = _block_log_weights(
                a, b, g, c, ratings[e], log_behaviors[trustees[e]], biases[trustors[e]],
                float(epsilon), theta,
            )
            idx, bad = _invert_rows(lw, uniforms[e])
            if bad.any():
                cand = int(e[np.argmax(bad)])
                failed = cand if failed < 0 else min(failed, cand)
            out[e, 0] = a[idx]
            out[e, 1] = b[idx]
            out[e, 2] = g[idx]
    return failed
