"""Pure-Python DOPRI5 kernels for arrowhead linear systems.

The generator is ``A = diag(d) + e0 u^T + v e0^T`` (row 0 and column 0 are
dense, everything else diagonal), so a matrix-vector product costs O(n).
This module mirrors ``_kernels_cy.pyx`` step for step and is used whenever
the compiled extension is unavailable.
"""

from __future__ import annotations

import numpy as np

from .errors import IntegrationError

# Dormand-Prince 5(4) tableau (autonomous form, nodes not needed)
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1 = 71 / 57600
E3 = -71 / 16695
E4 = 71 / 1920
E5 = -17253 / 339200
E6 = 22 / 525
E7 = -1 / 40

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


def _arrow_mv(d, u, v, y):
    out = d * y
    out[0] += np.dot(u[1:], y[1:])
    out[1:] += v[1:] * y[0]
    return out


class _Forward:
    """y' = A y with quadratures |y0|^2 and sum(w |y|^2)."""

    def __init__(self, d, u, v, w):
        self.d, self.u, self.v, self.w = d, u, v, w

    def __call__(self, z):
        dz = _arrow_mv(self.d, self.u, self.v, z)
        a2 = (z.real * z.real + z.imag * z.imag)
        return dz, np.array([a2[0], np.dot(self.w, a2)], dtype=complex)


class _Adjoint:
    """Reverse-time system for (y, lambda) and the gradient quadrature.

    In reversed time tau: y' = -A y, lambda' = A^H lambda + q0 e0 y0,
    s' = conj(lambda0) y0.
    """

    def __init__(self, d, u, v, q0):
        self.n = d.shape[0]
        self.d, self.u, self.v = d, u, v
        self.dh, self.uh, self.vh = d.conj(), v.conj(), u.conj()
        self.q0 = q0

    def __call__(self, z):
        n = self.n
        y, lam = z[:n], z[n:]
        dz = np.empty_like(z)
        dz[:n] = -_arrow_mv(self.d, self.u, self.v, y)
        dl = _arrow_mv(self.dh, self.uh, self.vh, lam)
        dl[0] += self.q0 * y[0]
        dz[n:] = dl
        return dz, np.array([lam[0].conjugate() * y[0]], dtype=complex)


def _err_norm(err, z, znew, errq, q, qnew, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(z), np.abs(znew))
    e = np.max(np.abs(err) / scale)
    if errq.shape[0]:
        sq = atol + rtol * np.maximum(np.abs(q), np.abs(qnew))
        e = max(e, np.max(np.abs(errq) / sq))
    return e


def _integrate(f, z0, nq, span, rtol, atol, h0, record):
    z = np.array(z0, dtype=complex)
    q = np.zeros(nq, dtype=complex)
    t = 0.0
    ts = [0.0] if record else None
    zs = [z.copy()] if record else None
    if span <= 0.0:
        return z, q, h0, 0, 0, ts, zs
    h = h0 if h0 > 0.0 else min(span, 0.01)
    h_next = h
    hmin = 1e-14 * max(1.0, span)
    k1, q1 = f(z)
    nsteps = nrej = 0
    while True:
        h_try = h
        last = t + h >= span
        if last:
            h = span - t
        k2, q2 = f(z + h * (A21 * k1))
        k3, q3 = f(z + h * (A31 * k1 + A32 * k2))
        k4, q4 = f(z + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5, q5 = f(z + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6, q6 = f(z + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        znew = z + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        qnew = q + h * (B1 * q1 + B3 * q3 + B4 * q4 + B5 * q5 + B6 * q6)
        k7, q7 = f(znew)
        err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        errq = h * (E1 * q1 + E3 * q3 + E4 * q4 + E5 * q5 + E6 * q6 + E7 * q7)
        en = _err_norm(err, z, znew, errq, q, qnew, rtol, atol)
        if not np.isfinite(en):
            raise IntegrationError(t)
        if en <= 1.0:
            fac = MAX_FACTOR if en == 0.0 else min(MAX_FACTOR, SAFETY * en ** -0.2)
            z, q, k1, q1 = znew, qnew, k7, q7
            nsteps += 1
            if last:
                t = span
                h_next = max(h_try, h * fac)
            else:
                t += h
            if record:
                ts.append(t)
                zs.append(z.copy())
            if last:
                break
            h = h * fac
        else:
            nrej += 1
            h = h * max(MIN_FACTOR, SAFETY * en ** -0.2)
            if h < hmin:
                raise IntegrationError(t)
    return z, q, h_next, nsteps, nrej, ts, zs


def forward(d, u, v, w, y0, t0, t1, rtol, atol, h0, record):
    """Integrate ``y' = A y`` over [t0, t1].

    Returns ``(y1, pop0, popw, h_next, nsteps, times, states)`` where
    ``pop0 = int |y0|^2`` and ``popw = int sum_i w_i |y_i|^2``. ``times`` and
    ``states`` hold every accepted step when ``record`` is set, else None.
    """
    f = _Forward(np.asarray(d, complex), np.asarray(u, complex),
                 np.asarray(v, complex), np.asarray(w, float))
    try:
        z, q, h, ns, _, ts, zs = _integrate(f, y0, 2, t1 - t0, rtol, atol, h0, record)
    except IntegrationError as exc:
        raise IntegrationError(t0 + exc.time) from None
    if record:
        ts = [t0 + s for s in ts]
        ts[-1] = t1
    return z, q[0].real, q[1].real, h, ns, ts, zs


def adjoint(d, u, v, q0, y1, lam1, t0, t1, rtol, atol, h0):
    """Integrate state and costate backward from t1 to t0.

    Returns ``(y0, lam0, s, h_next, nsteps)`` with
    ``s = int_{t0}^{t1} conj(lam_0) y_0 dt``.
    """
    d = np.asarray(d, complex)
    f = _Adjoint(d, np.asarray(u, complex), np.asarray(v, complex), q0)
    n = d.shape[0]
    z0 = np.concatenate([np.asarray(y1, complex), np.asarray(lam1, complex)])
    try:
        z, q, h, ns, _, _, _ = _integrate(f, z0, 1, t1 - t0, rtol, atol, h0, False)
    except IntegrationError as exc:
        raise IntegrationError(t1 - exc.time) from None
    return z[:n], z[n:], q[0], h, ns
