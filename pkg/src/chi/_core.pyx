# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled forward pass and loss gradient for health-index training.

Mirrors ``chi._kernels_py`` exactly in semantics. Rows are processed in
order and every reduction is a plain sequential sum, so results are
reproducible run to run.
"""

import numpy as np
from libc.math cimport exp, expm1, log, fabs, isfinite

cdef double ETA_SMALL = 1e-6


cdef inline void _rise(double s, double eta, double* h, double* d_eta, double* d_s) noexcept nogil:
    cdef double denom, num, e_s
    if fabs(eta) < ETA_SMALL:
        h[0] = s
        d_eta[0] = 0.5 * s * (1.0 - s)
        d_s[0] = 1.0
        return
    denom = -expm1(-eta)
    num = -expm1(-eta * s)
    e_s = exp(-eta * s)
    h[0] = num / denom
    d_eta[0] = (s * e_s * denom - num * exp(-eta)) / (denom * denom)
    d_s[0] = eta * e_s / denom


cdef inline void _curve(double x, int kind, int weak, double a, double b,
                        double eta, double gamma, double mode, double lo, double hi,
                        double r, double eps_h, double leak,
                        double* h, double* g_eta, double* g_gamma, double* g_r) noexcept nogil:
    cdef double p, dp_dr, f, s, ds_dr, width, hr, dh_deta, dh_ds, sf, dsf_dr, top, slope
    if weak:
        f = a * x + b
        p = f * (1.0 + r)
        dp_dr = f
    else:
        p = x
        dp_dr = 0.0
    if kind == 1 and p > mode:
        width = hi - mode
        sf = (p - mode) / width
        dsf_dr = dp_dr / width
        if sf > 1.0:
            sf = 1.0
            dsf_dr = 0.0
        hr = 1.0 - gamma * sf
        g_eta[0] = 0.0
        g_gamma[0] = -sf
        g_r[0] = -gamma * dsf_dr
    else:
        top = mode if kind == 1 else hi
        width = top - lo
        s = (p - lo) / width
        ds_dr = dp_dr / width
        if s < 0.0:
            s = 0.0
            ds_dr = 0.0
        elif s > 1.0:
            s = 1.0
            ds_dr = 0.0
        _rise(s, eta, &hr, &dh_deta, &dh_ds)
        g_eta[0] = dh_deta
        g_gamma[0] = 0.0
        g_r[0] = dh_ds * ds_dr
    if hr < eps_h:
        h[0] = eps_h
        slope = leak
        g_eta[0] *= slope
        g_gamma[0] *= slope
        g_r[0] *= slope
    else:
        h[0] = hr


def forward(const double[:, ::1] X, const long[::1] col, const int[::1] kind,
            const int[::1] weak, const double[::1] dep_a, const double[::1] dep_b,
            const double[::1] eta, const double[::1] gamma, const double[::1] mode,
            const double[::1] lo, const double[::1] hi, const double[::1] r, double eps_h):
    cdef Py_ssize_t n_rows = X.shape[0], K = col.shape[0], n, k
    H_arr = np.empty(n_rows, dtype=np.float64)
    h_arr = np.empty((n_rows, K), dtype=np.float64)
    cdef double[::1] H = H_arr
    cdef double[:, ::1] hm = h_arr
    cdef double acc, ge, gg, gr
    cdef Py_ssize_t bad_n = -1, bad_k = -1
    with nogil:
        for n in range(n_rows):
            acc = 0.0
            for k in range(K):
                _curve(X[n, col[k]], kind[k], weak[k], dep_a[k], dep_b[k], eta[k], gamma[k],
                       mode[k], lo[k], hi[k], r[k], eps_h, 1.0, &hm[n, k], &ge, &gg, &gr)
                if not isfinite(hm[n, k]):
                    bad_n = n
                    bad_k = k
                    break
                acc = acc + log(hm[n, k])
            if bad_n >= 0:
                break
            H[n] = exp(acc / K)
    if bad_n >= 0:
        raise FloatingPointError(bad_n, bad_k)
    return H_arr, h_arr


def loss_grad(const double[:, ::1] X, const double[::1] O, const long[::1] col,
              const int[::1] kind, const int[::1] weak, const double[::1] dep_a,
              const double[::1] dep_b, const double[::1] eta, const double[::1] gamma,
              const double[::1] mode, const double[::1] lo, const double[::1] hi,
              const double[::1] r, double eps_h, double leak, bint log_objective, double scale):
    cdef Py_ssize_t n_rows = X.shape[0], K = col.shape[0], n, k
    H_arr = np.empty(n_rows, dtype=np.float64)
    ge_arr = np.zeros(K, dtype=np.float64)
    gg_arr = np.zeros(K, dtype=np.float64)
    gr_arr = np.zeros(K, dtype=np.float64)
    buf = np.empty((4, K), dtype=np.float64)
    cdef double[::1] H = H_arr, G_eta = ge_arr, G_gamma = gg_arr, G_r = gr_arr
    cdef double[:, ::1] B = buf
    cdef double acc, Hn, resid, coef, w, sq = 0.0
    cdef Py_ssize_t bad_n = -1, bad_k = -1
    with nogil:
        for n in range(n_rows):
            acc = 0.0
            for k in range(K):
                _curve(X[n, col[k]], kind[k], weak[k], dep_a[k], dep_b[k], eta[k], gamma[k],
                       mode[k], lo[k], hi[k], r[k], eps_h, leak,
                       &B[0, k], &B[1, k], &B[2, k], &B[3, k])
                if not (isfinite(B[0, k]) and isfinite(B[1, k]) and isfinite(B[2, k]) and isfinite(B[3, k])):
                    bad_n = n
                    bad_k = k
                    break
                acc = acc + log(B[0, k])
            if bad_n >= 0:
                break
            Hn = exp(acc / K)
            H[n] = Hn
            if log_objective:
                resid = log(Hn) - log(O[n])
                coef = 2.0 * scale * resid / Hn
            else:
                resid = Hn - O[n]
                coef = 2.0 * scale * resid
            sq = sq + resid * resid
            for k in range(K):
                w = coef * Hn / (K * B[0, k])
                G_eta[k] += w * B[1, k]
                G_gamma[k] += w * B[2, k]
                G_r[k] += w * B[3, k]
    if bad_n >= 0:
        raise FloatingPointError(bad_n, bad_k)
    return sq / n_rows, H_arr, ge_arr, gg_arr, gr_arr


def mode_scan(const double[:, ::1] X, const double[::1] O, const long[::1] col,
              const int[::1] kind, const int[::1] weak, const double[::1] dep_a,
              const double[::1] dep_b, const double[::1] eta, const double[::1] gamma,
              const double[::1] mode, const double[::1] lo, const double[::1] hi,
              const double[::1] r, double eps_h, bint log_objective, Py_ssize_t k,
              const double[::1] candidates):
    """Objective value for each candidate mode of curve ``k``, others fixed."""
    cdef Py_ssize_t n_rows = X.shape[0], K = col.shape[0], n, j, c
    rest_arr = np.zeros(n_rows, dtype=np.float64)
    out_arr = np.empty(candidates.shape[0], dtype=np.float64)
    cdef double[::1] rest = rest_arr, out = out_arr
    cdef double hv, ge, gg, gr, acc, Hn, d
    with nogil:
        for n in range(n_rows):
            acc = 0.0
            for j in range(K):
                if j == k:
                    continue
                _curve(X[n, col[j]], kind[j], weak[j], dep_a[j], dep_b[j], eta[j], gamma[j],
                       mode[j], lo[j], hi[j], r[j], eps_h, 1.0, &hv, &ge, &gg, &gr)
                acc = acc + log(hv)
            rest[n] = acc
        for c in range(candidates.shape[0]):
            acc = 0.0
            for n in range(n_rows):
                _curve(X[n, col[k]], kind[k], weak[k], dep_a[k], dep_b[k], eta[k], gamma[k],
                       candidates[c], lo[k], hi[k], r[k], eps_h, 1.0, &hv, &ge, &gg, &gr)
                Hn = exp((rest[n] + log(hv)) / K)
                if log_objective:
                    d = log(Hn) - log(O[n])
                else:
                    d = Hn - O[n]
                acc = acc + d * d
            out[c] = acc / n_rows
    return out_arr
