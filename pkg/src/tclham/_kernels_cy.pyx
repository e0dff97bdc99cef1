# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 stepper for the bright sector.

Same contract as ``tclham._kernels_py.rk4_bright``. Each RK4 stage needs
both C @ x and C^H @ y; they are computed in one pass over C, which halves
the memory traffic of the (bandwidth-bound) dense products. C is held as
separate real and imaginary planes so the inner loops vectorize.
"""
from libc.math cimport cos, sin
from libc.stdlib cimport malloc, free

import numpy as np


cdef inline void _row_pass(const double* cr, const double* ci,
                           const double* xr, const double* xi,
                           double yr, double yi,
                           double* zr, double* zi,
                           Py_ssize_t n, double* outr, double* outi) noexcept nogil:
    # out = sum_j c_j x_j ;  z_j += conj(c_j) * y
    cdef Py_ssize_t j
    cdef double sr = 0.0, si = 0.0
    for j in range(n):
        sr = sr + cr[j] * xr[j] - ci[j] * xi[j]
        si = si + cr[j] * xi[j] + ci[j] * xr[j]
        zr[j] = zr[j] + cr[j] * yr + ci[j] * yi
        zi[j] = zi[j] + cr[j] * yi - ci[j] * yr
    outr[0] = sr
    outi[0] = si


cdef void _rhs(const double* Cr, const double* Ci, Py_ssize_t n1, Py_ssize_t n2,
               const double* p1r, const double* p1i, const double* p2r, const double* p2i,
               double lam,
               const double* ar, const double* ai, const double* br, const double* bi,
               double* dar, double* dai, double* dbr, double* dbi,
               double* xr, double* xi) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double yr, yi, ur, ui, sr, si
    for j in range(n2):
        xr[j] = p2r[j] * br[j] + p2i[j] * bi[j]
        xi[j] = p2r[j] * bi[j] - p2i[j] * br[j]
        dbr[j] = 0.0
        dbi[j] = 0.0
    for i in range(n1):
        yr = p1r[i] * ar[i] + p1i[i] * ai[i]
        yi = p1r[i] * ai[i] - p1i[i] * ar[i]
        _row_pass(Cr + i * n2, Ci + i * n2, xr, xi, yr, yi, dbr, dbi, n2, &sr, &si)
        # da_i = -i lam p1_i s
        ur = p1r[i] * sr - p1i[i] * si
        ui = p1r[i] * si + p1i[i] * sr
        dar[i] = lam * ui
        dai[i] = -lam * ur
    for j in range(n2):
        ur = p2r[j] * dbr[j] - p2i[j] * dbi[j]
        ui = p2r[j] * dbi[j] + p2i[j] * dbr[j]
        dbr[j] = lam * ui
        dbi[j] = -lam * ur


cdef inline void _phases(const double* e, Py_ssize_t n, double t, double* re, double* im) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        re[i] = cos(e[i] * t)
        im[i] = sin(e[i] * t)


def rk4_bright(C, e1, e2, double lam, a, b, double t0, double dt, Py_ssize_t nsteps):
    """Advance ``a`` and ``b`` in place by ``nsteps`` classical RK4 steps."""
    C = np.asarray(C)
    cdef const double[:, ::1] Cr = np.ascontiguousarray(C.real, dtype=np.float64)
    cdef const double[:, ::1] Ci = np.ascontiguousarray(C.imag, dtype=np.float64)
    cdef const double[::1] ev1 = np.ascontiguousarray(e1, dtype=np.float64)
    cdef const double[::1] ev2 = np.ascontiguousarray(e2, dtype=np.float64)
    if a.dtype != np.complex128 or b.dtype != np.complex128:
        raise TypeError("state vectors must be complex128")
    cdef Py_ssize_t n1 = ev1.shape[0], n2 = ev2.shape[0]
    if Cr.shape[0] != n1 or Cr.shape[1] != n2 or a.shape[0] != n1 or b.shape[0] != n2:
        raise ValueError("inconsistent kernel dimensions")
    if nsteps <= 0:
        return

    cdef double[::1] ar = np.ascontiguousarray(a.real)
    cdef double[::1] ai = np.ascontiguousarray(a.imag)
    cdef double[::1] br = np.ascontiguousarray(b.real)
    cdef double[::1] bi = np.ascontiguousarray(b.imag)

    # workspace: 4 stages x (a, b) x (re, im), stage state, scratch, 3 phase sets
    cdef Py_ssize_t total = 8 * n1 + 8 * n2 + 2 * n1 + 2 * n2 + 2 * n2 + 6 * n1 + 6 * n2
    cdef double* work = <double*> malloc(total * sizeof(double))
    if work == NULL:
        raise MemoryError()
    cdef double* kar = work
    cdef double* kai = kar + 4 * n1
    cdef double* kbr = kai + 4 * n1
    cdef double* kbi = kbr + 4 * n2
    cdef double* sar = kbi + 4 * n2
    cdef double* sai = sar + n1
    cdef double* sbr = sai + n1
    cdef double* sbi = sbr + n2
    cdef double* xr = sbi + n2
    cdef double* xi = xr + n2
    cdef double* ph = xi + n2     # [p1r, p1i] x 3 times then [p2r, p2i] x 3 times
    cdef double* q = ph + 6 * n1
    cdef Py_ssize_t k, i, s
    cdef double t, h, w = dt / 6.0
    cdef double* Ar = &ar[0]
    cdef double* Ai = &ai[0]
    cdef double* Br = &br[0]
    cdef double* Bi = &bi[0]
    cdef const double* pC_r = &Cr[0, 0]
    cdef const double* pC_i = &Ci[0, 0]
    cdef double stage_dt[4]
    cdef int stage_phase[4]
    stage_dt[0] = 0.0; stage_dt[1] = 0.5 * dt; stage_dt[2] = 0.5 * dt; stage_dt[3] = dt
    stage_phase[0] = 0; stage_phase[1] = 1; stage_phase[2] = 1; stage_phase[3] = 2
    try:
        with nogil:
            for k in range(nsteps):
                t = t0 + k * dt
                for s in range(3):
                    _phases(&ev1[0], n1, t + 0.5 * dt * s, ph + 2 * s * n1, ph + (2 * s + 1) * n1)
                    _phases(&ev2[0], n2, t + 0.5 * dt * s, q + 2 * s * n2, q + (2 * s + 1) * n2)
                for s in range(4):
                    h = stage_dt[s]
                    if s == 0:
                        for i in range(n1):
                            sar[i] = Ar[i]
                            sai[i] = Ai[i]
                        for i in range(n2):
                            sbr[i] = Br[i]
                            sbi[i] = Bi[i]
                    else:
                        for i in range(n1):
                            sar[i] = Ar[i] + h * kar[(s - 1) * n1 + i]
                            sai[i] = Ai[i] + h * kai[(s - 1) * n1 + i]
                        for i in range(n2):
                            sbr[i] = Br[i] + h * kbr[(s - 1) * n2 + i]
                            sbi[i] = Bi[i] + h * kbi[(s - 1) * n2 + i]
                    _rhs(pC_r, pC_i, n1, n2,
                         ph + 2 * stage_phase[s] * n1, ph + (2 * stage_phase[s] + 1) * n1,
                         q + 2 * stage_phase[s] * n2, q + (2 * stage_phase[s] + 1) * n2,
                         lam, sar, sai, sbr, sbi,
                         kar + s * n1, kai + s * n1, kbr + s * n2, kbi + s * n2, xr, xi)
                for i in range(n1):
                    Ar[i] = Ar[i] + w * (kar[i] + 2.0 * kar[n1 + i] + 2.0 * kar[2 * n1 + i] + kar[3 * n1 + i])
                    Ai[i] = Ai[i] + w * (kai[i] + 2.0 * kai[n1 + i] + 2.0 * kai[2 * n1 + i] + kai[3 * n1 + i])
                for i in range(n2):
                    Br[i] = Br[i] + w * (kbr[i] + 2.0 * kbr[n2 + i] + 2.0 * kbr[2 * n2 + i] + kbr[3 * n2 + i])
                    Bi[i] = Bi[i] + w * (kbi[i] + 2.0 * kbi[n2 + i] + 2.0 * kbi[2 * n2 + i] + kbi[3 * n2 + i])
    finally:
        free(work)
    a.real = ar
    a.imag = ai
    b.real = br
    b.imag = bi
