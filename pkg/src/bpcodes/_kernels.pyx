# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled belief-propagation kernels.

Same contracts as :mod:`bpcodes._fallback`: messages are in the classical
log P(0)/P(1) orientation and frames are processed one at a time, so memory
stays O(iters * m * n) regardless of batch size.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, atanh, exp, log, log1p, fabs, INFINITY

cnp.import_array()


cdef inline double _clampd(double x, double lo, double hi) noexcept nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


cdef inline double _th(double q) noexcept nogil:
    # tanh(q / 2); the exp form is about 2x cheaper away from the origin
    cdef double t, r
    if fabs(q) < 0.1:
        return tanh(0.5 * q)
    t = exp(-fabs(q))
    r = (1.0 - t) / (1.0 + t)
    return -r if q < 0 else r


cdef inline double _ath2(double x) noexcept nogil:
    # 2 atanh(x)
    if fabs(x) < 0.5:
        return 2.0 * atanh(x)
    return log((1.0 + x) / (1.0 - x))


cdef inline double _softplus(double x) noexcept nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double _sigmoid(double x) noexcept nogil:
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    cdef double e = exp(x)
    return e / (1.0 + e)


def edge_bp(const double[:, ::1] lam, const int[::1] row_ptr, const int[::1] edge_var,
            const int[::1] var_ptr, const int[::1] var_edge, int iters, bint minsum,
            double eps, double clip, double[:, ::1] out, per):
    cdef Py_ssize_t B = lam.shape[0], n = lam.shape[1]
    cdef Py_ssize_t m = row_ptr.shape[0] - 1, E = edge_var.shape[0]
    cdef bint keep = per is not None
    cdef double[:, :, ::1] per_v
    if keep:
        per_v = per
    cdef double[::1] R = np.zeros(E)
    cdef double[::1] Q = np.zeros(E)
    cdef double[::1] tot = np.zeros(n)
    cdef Py_ssize_t dmax = 1
    cdef Py_ssize_t j
    for j in range(m):
        if row_ptr[j + 1] - row_ptr[j] > dmax:
            dmax = row_ptr[j + 1] - row_ptr[j]
    cdef double[::1] pre = np.empty(dmax + 1)
    cdef double[::1] tv = np.empty(dmax)
    cdef Py_ssize_t b, t, e, i, a, d, lo, amin
    cdef double s, acc, sgn, m1, m2, mag, x, lo_c = -1.0 + eps, hi_c = 1.0 - eps

    with nogil:
        for b in range(B):
            for e in range(E):
                R[e] = 0.0
            for t in range(iters):
                for i in range(n):
                    s = lam[b, i]
                    for a in range(var_ptr[i], var_ptr[i + 1]):
                        s = s + R[var_edge[a]]
                    tot[i] = s
                for e in range(E):
                    Q[e] = _clampd(tot[edge_var[e]] - R[e], -clip, clip)
                for j in range(m):
                    lo = row_ptr[j]
                    d = row_ptr[j + 1] - lo
                    if d <= 1:
                        for e in range(lo, lo + d):
                            R[e] = 0.0
                        continue
                    if minsum:
                        sgn = 1.0
                        m1 = INFINITY
                        m2 = INFINITY
                        amin = 0
                        for a in range(d):
                            x = Q[lo + a]
                            if x < 0:
                                sgn = -sgn
                            mag = fabs(x)
                            if mag < m1:
                                m2 = m1
                                m1 = mag
                                amin = a
                            elif mag < m2:
                                m2 = mag
                        for a in range(d):
                            x = Q[lo + a]
                            s = -sgn if x < 0 else sgn
                            R[lo + a] = s * (m2 if a == amin else m1)
                    else:
                        pre[0] = 1.0
                        for a in range(d):
                            tv[a] = _th(Q[lo + a])
                            pre[a + 1] = pre[a] * tv[a]
                        acc = 1.0
                        for a in range(d - 1, -1, -1):
                            x = _clampd(pre[a] * acc, lo_c, hi_c)
                            R[lo + a] = _ath2(x)
                            acc = acc * tv[a]
                if keep:
                    for i in range(n):
                        s = lam[b, i]
                        for a in range(var_ptr[i], var_ptr[i + 1]):
                            s = s + R[var_edge[a]]
                        per_v[t, b, i] = s
            for i in range(n):
                s = lam[b, i]
                for a in range(var_ptr[i], var_ptr[i + 1]):
                    s = s + R[var_edge[a]]
                out[b, i] = s


cdef void _frame_forward(const double[::1] lam, const double[:, ::1] H, int iters, double eps,
                         double clip, const unsigned char[::1] act,
                         double[:, :, ::1] Qraw, double[:, :, ::1] TT, double[:, :, ::1] F,
                         double[:, ::1] P, double[:, :, ::1] X, double[:, :, ::1] R,
                         double[:, ::1] outs) noexcept nogil:
    cdef Py_ssize_t m = H.shape[0], n = H.shape[1]
    cdef Py_ssize_t t, j, i, i2
    cdef double s, q, tt, p, x, lo_c = -1.0 + eps, hi_c = 1.0 - eps, h
    for t in range(iters):
        for i in range(n):
            s = lam[i]
            if t > 0:
                for j in range(m):
                    s = s + R[t - 1, j, i] * H[j, i]
            outs[t, i] = s  # scratch: total incoming before exclusion
        for j in range(m):
            p = 1.0
            for i in range(n):
                if t == 0:
                    q = lam[i]
                else:
                    q = outs[t, i] - R[t - 1, j, i]
                Qraw[t, j, i] = q
                tt = _th(_clampd(q, -clip, clip))
                TT[t, j, i] = tt
                h = H[j, i]
                F[t, j, i] = tt * h + (1.0 - h)
                p = p * F[t, j, i]
            P[t, j] = p
            for i in range(n):
                tt = TT[t, j, i]
                if fabs(tt) < eps:
                    x = 1.0
                    for i2 in range(n):
                        if i2 != i:
                            x = x * F[t, j, i2]
                else:
                    x = p / tt
                X[t, j, i] = x
                if act[j]:
                    R[t, j, i] = _ath2(_clampd(x, lo_c, hi_c))
                else:
                    R[t, j, i] = 0.0
        for i in range(n):
            s = lam[i]
            for j in range(m):
                s = s + R[t, j, i] * H[j, i]
            outs[t, i] = s


def _alloc(int iters, Py_ssize_t m, Py_ssize_t n):
    T = max(iters, 1)
    return (np.empty((T, m, n)), np.empty((T, m, n)), np.empty((T, m, n)),
            np.empty((T, m)), np.empty((T, m, n)), np.empty((T, m, n)), np.empty((T, n)))


def tensor_bp(const double[:, ::1] lam, const double[:, ::1] H, int iters, double eps,
              double clip, const unsigned char[::1] act, double[:, ::1] out, per):
    cdef Py_ssize_t B = lam.shape[0], n = lam.shape[1], m = H.shape[0]
    cdef bint keep = per is not None
    cdef double[:, :, ::1] per_v
    if keep:
        per_v = per
    a = _alloc(iters, m, n)
    cdef double[:, :, ::1] Qraw = a[0], TT = a[1], F = a[2], X = a[4], R = a[5]
    cdef double[:, ::1] P = a[3], outs = a[6]
    cdef Py_ssize_t b, t, i
    with nogil:
        for b in range(B):
            _frame_forward(lam[b], H, iters, eps, clip, act, Qraw, TT, F, P, X, R, outs)
            for i in range(n):
                out[b, i] = outs[iters - 1, i] if iters > 0 else lam[b, i]
            if keep:
                for t in range(iters):
                    for i in range(n):
                        per_v[t, b, i] = outs[t, i]


def tensor_bp_grad(const double[:, ::1] lam, const double[:, ::1] H, int iters, double eps,
                   double clip, const unsigned char[::1] act, bint summed, double[:, ::1] gH):
    cdef Py_ssize_t B = lam.shape[0], n = lam.shape[1], m = H.shape[0]
    a = _alloc(iters, m, n)
    cdef double[:, :, ::1] Qraw = a[0], TT = a[1], F = a[2], X = a[4], R = a[5]
    cdef double[:, ::1] P = a[3], outs = a[6]
    cdef double[:, ::1] gR = np.zeros((m, n))
    cdef double[:, ::1] gF = np.zeros((m, n))
    cdef double[::1] gS = np.zeros(n)
    cdef double[::1] gP = np.zeros(m)
    cdef double[::1] pre = np.empty(n + 1)
    cdef Py_ssize_t b, t, j, i, i2, i3
    cdef double loss = 0.0, g, x, xc, tt, gx, w, lo_c = -1.0 + eps, hi_c = 1.0 - eps, acc, h
    for j in range(m):
        for i in range(n):
            gH[j, i] = 0.0
    with nogil:
        for b in range(B):
            if iters == 0:
                for i in range(n):
                    loss = loss + _softplus(-lam[b, i])
                continue
            _frame_forward(lam[b], H, iters, eps, clip, act, Qraw, TT, F, P, X, R, outs)
            for j in range(m):
                for i in range(n):
                    gR[j, i] = 0.0
            for t in range(iters - 1, -1, -1):
                if summed or t == iters - 1:
                    for i in range(n):
                        loss = loss + _softplus(-outs[t, i])
                        g = -_sigmoid(-outs[t, i])
                        for j in range(m):
                            gR[j, i] = gR[j, i] + g * H[j, i]
                            gH[j, i] = gH[j, i] + g * R[t, j, i]
                # through R = 2 atanh(clamp(X)) and X = P / tt (or the omission product)
                for j in range(m):
                    gP[j] = 0.0
                    for i in range(n):
                        gF[j, i] = 0.0
                for j in range(m):
                    if not act[j]:
                        continue
                    for i in range(n):
                        x = X[t, j, i]
                        if x <= lo_c or x >= hi_c:
                            continue
                        gx = gR[j, i] * 2.0 / (1.0 - x * x)
                        tt = TT[t, j, i]
                        if fabs(tt) < eps:
                            for i2 in range(n):
                                if i2 == i:
                                    continue
                                w = 1.0
                                for i3 in range(n):
                                    if i3 != i and i3 != i2:
                                        w = w * F[t, j, i3]
                                gF[j, i2] = gF[j, i2] + gx * w
                            gR[j, i] = 0.0  # reused below as d/d tt (direct part)
                        else:
                            gP[j] = gP[j] + gx / tt
                            gR[j, i] = -gx * P[t, j] / (tt * tt)
                    for i in range(n):
                        if not (X[t, j, i] > lo_c and X[t, j, i] < hi_c):
                            gR[j, i] = 0.0
                for j in range(m):
                    if not act[j]:
                        for i in range(n):
                            gR[j, i] = 0.0
                    # exclusive products of F along the row
                    pre[0] = 1.0
                    for i in range(n):
                        pre[i + 1] = pre[i] * F[t, j, i]
                    acc = 1.0
                    for i in range(n - 1, -1, -1):
                        gF[j, i] = gF[j, i] + gP[j] * pre[i] * acc
                        acc = acc * F[t, j, i]
                # gR now holds d/d tt (direct); add the F path and go to Q
                for j in range(m):
                    for i in range(n):
                        h = H[j, i]
                        tt = TT[t, j, i]
                        g = gR[j, i] + gF[j, i] * h
                        gH[j, i] = gH[j, i] + gF[j, i] * (tt - 1.0)
                        if fabs(Qraw[t, j, i]) <= clip:
                            gR[j, i] = g * 0.5 * (1.0 - tt * tt)  # now d/dQ
                        else:
                            gR[j, i] = 0.0
                if t > 0:
                    for i in range(n):
                        g = 0.0
                        for j in range(m):
                            g = g + gR[j, i]
                        gS[i] = g
                    for j in range(m):
                        for i in range(n):
                            gH[j, i] = gH[j, i] + gS[i] * R[t - 1, j, i]
                            gR[j, i] = gS[i] * H[j, i] - gR[j, i]
    return loss
