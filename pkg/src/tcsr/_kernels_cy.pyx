# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled DOPRI5 kernels for arrowhead linear systems.

Same contract as ``tcsr._kernels_py``; see that module for the equations.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow, isfinite
from libc.stdlib cimport malloc, free

from tcsr.errors import IntegrationError

ctypedef double complex dc

cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 5.0

# modes
cdef int FORWARD = 0
cdef int ADJOINT = 1


cdef struct Sys:
    int mode
    int n
    dc* d
    dc* u
    dc* v
    double* w
    double q0


cdef inline double abs2(dc z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double cabs(dc z) nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


cdef inline dc conj(dc z) nogil:
    return z.real - 1j * z.imag


cdef void rhs(Sys* s, dc* z, dc* dz, dc* dq) nogil:
    cdef int n = s.n, i
    cdef dc acc, y0, l0
    cdef double pw
    if s.mode == FORWARD:
        y0 = z[0]
        acc = s.d[0] * y0
        pw = 0.0
        for i in range(1, n):
            acc = acc + s.u[i] * z[i]
            dz[i] = s.d[i] * z[i] + s.v[i] * y0
            pw += s.w[i] * abs2(z[i])
        dz[0] = acc
        dq[0] = abs2(y0)
        dq[1] = pw + s.w[0] * abs2(y0)
    else:
        # z = [y (n), lam (n)], reversed time
        y0 = z[0]
        l0 = z[n]
        acc = s.d[0] * y0
        for i in range(1, n):
            acc = acc + s.u[i] * z[i]
            dz[i] = -(s.d[i] * z[i] + s.v[i] * y0)
        dz[0] = -acc
        # A^H: diag conj(d), row0 conj(v), col0 conj(u)
        acc = conj(s.d[0]) * l0
        for i in range(1, n):
            acc = acc + conj(s.v[i]) * z[n + i]
            dz[n + i] = conj(s.d[i]) * z[n + i] + conj(s.u[i]) * l0
        dz[n] = acc + s.q0 * y0
        dq[0] = conj(l0) * y0


cdef int integrate(Sys* s, dc* z, int m, dc* q, int nq, double span,
                   double rtol, double atol, double* h_io, double* t_fail,
                   long* nsteps, list rec_t, list rec_z, double t_off) except -2:
    """Advance z (length m) and quadratures q over [0, span]; 0 ok, -1 failure."""
    cdef int i, last, ok = 0
    cdef double t = 0.0, h, h_try, h_next, en, e, sc, fac
    cdef double hmin = 1e-14 * (span if span > 1.0 else 1.0)
    cdef int nbuf = 9 * m + 9 * nq
    cdef dc* buf = <dc*> malloc(nbuf * sizeof(dc))
    if buf == NULL:
        raise MemoryError()
    cdef dc* k1 = buf
    cdef dc* k2 = k1 + m
    cdef dc* k3 = k2 + m
    cdef dc* k4 = k3 + m
    cdef dc* k5 = k4 + m
    cdef dc* k6 = k5 + m
    cdef dc* k7 = k6 + m
    cdef dc* ztmp = k7 + m
    cdef dc* znew = ztmp + m
    cdef dc* q1 = znew + m
    cdef dc* q2 = q1 + nq
    cdef dc* q3 = q2 + nq
    cdef dc* q4 = q3 + nq
    cdef dc* q5 = q4 + nq
    cdef dc* q6 = q5 + nq
    cdef dc* q7 = q6 + nq
    cdef dc* qnew = q7 + nq
    cdef dc* qerr = qnew + nq
    cdef dc ei

    if span <= 0.0:
        free(buf)
        return 0
    h = h_io[0]
    if h <= 0.0:
        h = span if span < 0.01 else 0.01
    h_next = h
    rhs(s, z, k1, q1)
    while True:
        h_try = h
        last = t + h >= span
        if last:
            h = span - t
        for i in range(m):
            ztmp[i] = z[i] + h * (A21 * k1[i])
        rhs(s, ztmp, k2, q2)
        for i in range(m):
            ztmp[i] = z[i] + h * (A31 * k1[i] + A32 * k2[i])
        rhs(s, ztmp, k3, q3)
        for i in range(m):
            ztmp[i] = z[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(s, ztmp, k4, q4)
        for i in range(m):
            ztmp[i] = z[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(s, ztmp, k5, q5)
        for i in range(m):
            ztmp[i] = z[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        rhs(s, ztmp, k6, q6)
        for i in range(m):
            znew[i] = z[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        for i in range(nq):
            qnew[i] = q[i] + h * (B1 * q1[i] + B3 * q3[i] + B4 * q4[i] + B5 * q5[i] + B6 * q6[i])
        rhs(s, znew, k7, q7)
        en = 0.0
        for i in range(m):
            ei = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * (cabs(z[i]) if cabs(z[i]) > cabs(znew[i]) else cabs(znew[i]))
            e = cabs(ei) / sc
            if e > en or e != e:
                en = e
        for i in range(nq):
            ei = h * (E1 * q1[i] + E3 * q3[i] + E4 * q4[i] + E5 * q5[i] + E6 * q6[i] + E7 * q7[i])
            sc = atol + rtol * (cabs(q[i]) if cabs(q[i]) > cabs(qnew[i]) else cabs(qnew[i]))
            e = cabs(ei) / sc
            if e > en or e != e:
                en = e
        if not isfinite(en):
            t_fail[0] = t
            ok = -1
            break
        if en <= 1.0:
            if en == 0.0:
                fac = MAX_FACTOR
            else:
                fac = SAFETY * pow(en, -0.2)
                if fac > MAX_FACTOR:
                    fac = MAX_FACTOR
            for i in range(m):
                z[i] = znew[i]
                k1[i] = k7[i]
            for i in range(nq):
                q[i] = qnew[i]
                q1[i] = q7[i]
            nsteps[0] += 1
            if last:
                t = span
                h_next = h_try if h_try > h * fac else h * fac
            else:
                t += h
            if rec_t is not None:
                rec_t.append(t_off + t)
                rec_z.append(np.array(<dc[:m]> z, copy=True))
            if last:
                break
            h = h * fac
        else:
            fac = SAFETY * pow(en, -0.2)
            if fac < MIN_FACTOR:
                fac = MIN_FACTOR
            h = h * fac
            if h < hmin:
                t_fail[0] = t
                ok = -1
                break
    free(buf)
    h_io[0] = h_next
    return ok


def forward(d, u, v, w, y0, double t0, double t1, double rtol, double atol,
            double h0, bint record):
    cdef dc[::1] dv = np.ascontiguousarray(d, dtype=np.complex128)
    cdef dc[::1] uv = np.ascontiguousarray(u, dtype=np.complex128)
    cdef dc[::1] vv = np.ascontiguousarray(v, dtype=np.complex128)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    z_arr = np.array(y0, dtype=np.complex128, copy=True)
    cdef dc[::1] zv = z_arr
    cdef int n = dv.shape[0]
    cdef dc q[2]
    cdef double h = h0, t_fail = 0.0
    cdef long nsteps = 0
    cdef Sys s
    s.mode = FORWARD
    s.n = n
    s.d = &dv[0]
    s.u = &uv[0]
    s.v = &vv[0]
    s.w = &wv[0]
    s.q0 = 0.0
    q[0] = 0.0
    q[1] = 0.0
    rec_t = [t0] if record else None
    rec_z = [z_arr.copy()] if record else None
    if integrate(&s, &zv[0], n, q, 2, t1 - t0, rtol, atol, &h, &t_fail,
                 &nsteps, rec_t, rec_z, t0) != 0:
        raise IntegrationError(t0 + t_fail)
    if record:
        rec_t[len(rec_t) - 1] = t1
    return z_arr, q[0].real, q[1].real, h, nsteps, rec_t, rec_z


def adjoint(d, u, v, double q0, y1, lam1, double t0, double t1, double rtol,
            double atol, double h0):
    cdef dc[::1] dv = np.ascontiguousarray(d, dtype=np.complex128)
    cdef dc[::1] uv = np.ascontiguousarray(u, dtype=np.complex128)
    cdef dc[::1] vv = np.ascontiguousarray(v, dtype=np.complex128)
    cdef int n = dv.shape[0]
    z_arr = np.concatenate([np.asarray(y1, dtype=np.complex128),
                            np.asarray(lam1, dtype=np.complex128)])
    cdef dc[::1] zv = z_arr
    cdef dc q[1]
    cdef double h = h0, t_fail = 0.0
    cdef long nsteps = 0
    cdef double wdummy = 0.0
    cdef Sys s
    s.mode = ADJOINT
    s.n = n
    s.d = &dv[0]
    s.u = &uv[0]
    s.v = &vv[0]
    s.w = &wdummy
    s.q0 = q0
    q[0] = 0.0
    if integrate(&s, &zv[0], 2 * n, q, 1, t1 - t0, rtol, atol, &h, &t_fail,
                 &nsteps, None, None, 0.0) != 0:
        raise IntegrationError(t1 - t_fail)
    return z_arr[:n].copy(), z_arr[n:].copy(), q[0], h, nsteps
