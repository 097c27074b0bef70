# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of prescreen._kernels_py.

Same entry points, same conventions; see the Python module for the
documentation.  The scalar inner loops here avoid the temporary arrays
the numpy fallback allocates per mixture component.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fmin, fmax

cnp.import_array()

FAM_INDEPENDENCE = 0
FAM_COMONOTONIC = 1
FAM_AMH = 2
FAM_FGM = 3

KIND_KAPPA = 0
KIND_GMAR = 1
KIND_H = 2
KIND_SMALLH = 3
KIND_GK = 4

IMPLEMENTATION = "compiled"


cdef inline double _c_one(int fam, double alpha, double x, double y) nogil:
    cdef double d
    if fam == 0:
        return x * y
    elif fam == 1:
        return fmin(x, y)
    elif fam == 2:
        d = 1.0 - alpha * (1.0 - x) * (1.0 - y)
        if d <= 0.0:
            return 0.0
        return x * y / d
    else:
        return x * y * (1.0 + alpha * (1.0 - x) * (1.0 - y))


cdef inline double _c1_one(int fam, double alpha, double x, double y) nogil:
    cdef double d
    if fam == 0:
        return y
    elif fam == 1:
        return 1.0 if x <= y else 0.0
    elif fam == 2:
        d = 1.0 - alpha * (1.0 - x) * (1.0 - y)
        if d <= 0.0:
            return 0.0
        return y * (1.0 - alpha * (1.0 - y)) / (d * d)
    else:
        return y * (1.0 + alpha * (1.0 - 2.0 * x) * (1.0 - y))


cdef inline double _c2_one(int fam, double alpha, double x, double y) nogil:
    cdef double d
    if fam == 0:
        return x
    elif fam == 1:
        return 1.0 if y < x else 0.0
    elif fam == 2:
        d = 1.0 - alpha * (1.0 - x) * (1.0 - y)
        if d <= 0.0:
            return 0.0
        return x * (1.0 - alpha * (1.0 - x)) / (d * d)
    else:
        return x * (1.0 + alpha * (1.0 - x) * (1.0 - 2.0 * y))


cdef inline double _mix_c(const long[:] fams, const double[:] alphas,
                          const double[:] weights, double x, double u) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(fams.shape[0]):
        acc += weights[i] * _c_one(<int>fams[i], alphas[i], x, u)
    return acc


cdef inline double _mix_c1(const long[:] fams, const double[:] alphas,
                           const double[:] weights, double x, double u) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(fams.shape[0]):
        acc += weights[i] * _c1_one(<int>fams[i], alphas[i], x, u)
    return acc


def copula_cab(fams, alphas, weights, x, y):
    x_arr = np.ascontiguousarray(np.broadcast_arrays(
        np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))[0])
    y_arr = np.ascontiguousarray(np.broadcast_arrays(
        np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))[1])
    shape = x_arr.shape
    cdef double[::1] xs = x_arr.ravel()
    cdef double[::1] ys = y_arr.ravel()
    cdef long[:] fs = np.ascontiguousarray(fams, dtype=np.int64)
    cdef double[:] als = np.ascontiguousarray(alphas, dtype=np.float64)
    cdef double[:] ws = np.ascontiguousarray(weights, dtype=np.float64)
    out_c = np.zeros(xs.shape[0])
    out_c1 = np.zeros(xs.shape[0])
    out_c2 = np.zeros(xs.shape[0])
    cdef double[::1] c = out_c
    cdef double[::1] c1 = out_c1
    cdef double[::1] c2 = out_c2
    cdef Py_ssize_t i, j
    cdef double w
    with nogil:
        for i in range(xs.shape[0]):
            for j in range(fs.shape[0]):
                w = ws[j]
                c[i] += w * _c_one(<int>fs[j], als[j], xs[i], ys[i])
                c1[i] += w * _c1_one(<int>fs[j], als[j], xs[i], ys[i])
                c2[i] += w * _c2_one(<int>fs[j], als[j], xs[i], ys[i])
    return (out_c.reshape(shape), out_c1.reshape(shape), out_c2.reshape(shape))


def integrand_matrix(kind, fams, alphas, weights, n, m, ipow, fx, fv, u):
    u_arr = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] uu = u_arr
    cdef double[:] fxs = np.ascontiguousarray(fx, dtype=np.float64)
    cdef double[:] fvs = np.ascontiguousarray(fv, dtype=np.float64)
    cdef long[:] fs = np.ascontiguousarray(fams, dtype=np.int64)
    cdef double[:] als = np.ascontiguousarray(alphas, dtype=np.float64)
    cdef double[:] ws = np.ascontiguousarray(weights, dtype=np.float64)
    out = np.empty_like(u_arr)
    cdef double[:, ::1] res = out
    cdef int kk = kind, nn = n, mm = m, ip = ipow
    cdef Py_ssize_t p, t
    cdef double uval, wgt, a, b, bx, val, x, v
    with nogil:
        for p in range(uu.shape[0]):
            x = fxs[p]
            v = fvs[p]
            for t in range(uu.shape[1]):
                uval = uu[p, t]
                wgt = (mm - nn) * pow(uval, mm - nn - 1)
                if kk == 0:
                    b = fmax(1.0 - _mix_c1(fs, als, ws, v, uval), 0.0)
                    val = b * pow(1.0 - uval, nn - 1)
                elif kk == 1:
                    a = fmax(x - _mix_c(fs, als, ws, x, uval), 0.0)
                    val = a * pow(1.0 - uval, nn - 1)
                elif kk == 2:
                    a = fmax(x - _mix_c(fs, als, ws, x, uval), 0.0)
                    b = fmax(1.0 - _mix_c1(fs, als, ws, v, uval), 0.0)
                    val = pow(a, nn - 1) * b
                elif kk == 3:
                    a = fmax(x - _mix_c(fs, als, ws, x, uval), 0.0)
                    bx = fmax(1.0 - _mix_c1(fs, als, ws, x, uval), 0.0)
                    b = fmax(1.0 - _mix_c1(fs, als, ws, v, uval), 0.0)
                    val = pow(a, nn - 2) * bx * b
                else:
                    a = fmax(x - _mix_c(fs, als, ws, x, uval), 0.0)
                    b = fmax(1.0 - uval - a, 0.0)
                    val = pow(a, nn - ip) * pow(b, ip)
                res[p, t] = val * wgt
    return out


def psi_matrix(fams, alphas, weights, n, m, fvmat, u):
    u_arr = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] uu = u_arr
    cdef double[:, ::1] fvs = np.ascontiguousarray(fvmat, dtype=np.float64)
    cdef long[:] fs = np.ascontiguousarray(fams, dtype=np.int64)
    cdef double[:] als = np.ascontiguousarray(alphas, dtype=np.float64)
    cdef double[:] ws = np.ascontiguousarray(weights, dtype=np.float64)
    out = np.empty_like(u_arr)
    cdef double[:, ::1] res = out
    cdef int nn = n, mm = m
    cdef Py_ssize_t p, t, k
    cdef double uval, val, b
    with nogil:
        for p in range(uu.shape[0]):
            for t in range(uu.shape[1]):
                uval = uu[p, t]
                val = (mm - nn) * pow(uval, mm - nn - 1)
                for k in range(nn):
                    b = fmax(1.0 - _mix_c1(fs, als, ws, fvs[p, k], uval), 0.0)
                    val *= b
                res[p, t] = val
    return out


def invert_c1(fams, alphas, weights, comp, x, u):
    x_arr = np.ascontiguousarray(x, dtype=np.float64)
    u_arr = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] xs = x_arr.ravel()
    cdef double[::1] us = u_arr.ravel()
    cdef long[::1] cps = np.ascontiguousarray(comp, dtype=np.int64).ravel()
    cdef long[:] fs = np.ascontiguousarray(fams, dtype=np.int64)
    cdef double[:] als = np.ascontiguousarray(alphas, dtype=np.float64)
    out = np.empty_like(u_arr)
    cdef double[::1] ys = out.ravel()
    cdef Py_ssize_t i
    cdef int fam
    cdef double alpha, a, disc, b, qa, qb, qq, denom, y
    with nogil:
        for i in range(us.shape[0]):
            fam = <int>fs[cps[i]]
            alpha = als[cps[i]]
            if fam == 0:
                ys[i] = us[i]
            elif fam == 1:
                ys[i] = xs[i]
            elif fam == 3:
                a = alpha * (1.0 - 2.0 * xs[i])
                disc = (1.0 + a) * (1.0 + a) - 4.0 * a * us[i]
                disc = sqrt(fmax(disc, 0.0))
                y = 2.0 * us[i] / (1.0 + a + disc)
                ys[i] = fmin(fmax(y, 0.0), 1.0)
            else:
                b = alpha * (1.0 - xs[i])
                qa = alpha - us[i] * b * b
                qb = 1.0 - alpha - 2.0 * us[i] * b * (1.0 - b)
                qq = us[i] * (1.0 - b) * (1.0 - b)
                disc = sqrt(fmax(qb * qb + 4.0 * qa * qq, 0.0))
                denom = qb + disc
                y = 2.0 * qq / denom if denom > 1e-300 else 0.0
                ys[i] = fmin(fmax(y, 0.0), 1.0)
    return out
