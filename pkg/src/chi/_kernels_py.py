"""Vectorized numpy implementation of the forward pass and loss gradient.

Same signatures and semantics as the compiled ``chi._core`` module; used when
the extension is not built or ``CHI_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import numpy as np

ETA_SMALL = 1e-6


def _rise(s, eta):
    """Saturating curve value, d/d(eta) and d/ds, elementwise."""
    small = np.abs(eta) < ETA_SMALL
    eta_safe = np.where(small, 1.0, eta)
    denom = -np.expm1(-eta_safe)
    num = -np.expm1(-eta_safe * s)
    e_s = np.exp(-eta_safe * s)
    h = num / denom
    d_eta = (s * e_s * denom - num * np.exp(-eta_safe)) / (denom * denom)
    d_s = eta_safe * e_s / denom
    h = np.where(small, s, h)
    d_eta = np.where(small, 0.5 * s * (1.0 - s), d_eta)
    d_s = np.where(small, 1.0, d_s)
    return h, d_eta, d_s


def _curves(X, col, kind, weak, dep_a, dep_b, eta, gamma, mode, lo, hi, r, eps_h, leak):
    x = X[:, col]
    f = dep_a * x + dep_b
    is_weak = weak.astype(bool)
    p = np.where(is_weak, f * (1.0 + r), x)
    dp_dr = np.where(is_weak, f, 0.0)

    unimodal = kind.astype(bool)
    falling = unimodal & (p > mode)
    top = np.where(unimodal, mode, hi)
    width_r = top - lo
    s = (p - lo) / width_r
    ds_dr = dp_dr / width_r
    ds_dr = np.where((s < 0.0) | (s > 1.0), 0.0, ds_dr)
    s = np.clip(s, 0.0, 1.0)
    h_r, dh_deta, dh_ds = _rise(s, eta)

    width_f = hi - mode
    sf = (p - mode) / width_f
    dsf_dr = np.where(sf > 1.0, 0.0, dp_dr / width_f)
    sf = np.minimum(sf, 1.0)
    h_f = 1.0 - gamma * sf

    h_raw = np.where(falling, h_f, h_r)
    d_eta = np.where(falling, 0.0, dh_deta)
    d_gamma = np.where(falling, -sf, 0.0)
    d_r = np.where(falling, -gamma * dsf_dr, dh_ds * ds_dr)

    floored = h_raw < eps_h
    h = np.where(floored, eps_h, h_raw)
    slope = np.where(floored, leak, 1.0)
    return h, d_eta * slope, d_gamma * slope, d_r * slope


def _check_finite(*arrays):
    for a in arrays:
        bad = np.argwhere(~np.isfinite(a))
        if bad.size:
            idx = tuple(int(i) for i in bad[0])
            raise FloatingPointError(idx[0], idx[1] if len(idx) > 1 else -1)


def forward(X, col, kind, weak, dep_a, dep_b, eta, gamma, mode, lo, hi, r, eps_h):
    h, _, _, _ = _curves(X, col, kind, weak, dep_a, dep_b, eta, gamma, mode, lo, hi, r, eps_h, 1.0)
    _check_finite(h)
    H = np.exp(np.log(h).sum(axis=1) / h.shape[1])
    return H, h


def loss_grad(X, O, col, kind, weak, dep_a, dep_b, eta, gamma, mode, lo, hi, r,
              eps_h, leak, log_objective, scale):
    h, d_eta, d_gamma, d_r = _curves(X, col, kind, weak, dep_a, dep_b, eta, gamma,
                                     mode, lo, hi, r, eps_h, leak)
    _check_finite(h, d_eta, d_gamma, d_r)
    n, k = h.shape
    H = np.exp(np.log(h).sum(axis=1) / k)
    if log_objective:
        resid = np.log(H) - np.log(O)
        coef = 2.0 * scale * resid / H
    else:
        resid = H - O
        coef = 2.0 * scale * resid
    loss = float(np.dot(resid, resid) / n)
    w = (coef * H)[:, None] / (k * h)
    return loss, H, (w * d_eta).sum(axis=0), (w * d_gamma).sum(axis=0), (w * d_r).sum(axis=0)


def mode_scan(X, O, col, kind, weak, dep_a, dep_b, eta, gamma, mode, lo, hi, r,
              eps_h, log_objective, k, candidates):
    """Objective value for each candidate mode of curve ``k``, others fixed."""
    h, _, _, _ = _curves(X, col, kind, weak, dep_a, dep_b, eta, gamma, mode, lo, hi, r, eps_h, 1.0)
    K = h.shape[1]
    logs = np.log(h)
    rest = logs.sum(axis=1) - logs[:, k]
    out = np.empty(len(candidates))
    sl = slice(k, k + 1)
    for i, cand in enumerate(candidates):
        m = mode[sl].copy()
        m[0] = cand
        hk, _, _, _ = _curves(X, col[sl], kind[sl], weak[sl], dep_a[sl], dep_b[sl], eta[sl],
                              gamma[sl], m, lo[sl], hi[sl], r[sl], eps_h, 1.0)
        H = np.exp((rest + np.log(hk[:, 0])) / K)
        d = np.log(H) - np.log(O) if log_objective else H - O
        out[i] = np.dot(d, d) / len(d)
    return out
