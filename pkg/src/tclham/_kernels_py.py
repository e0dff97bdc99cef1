"""Pure-numpy RK4 stepper for the bright sector (fallback for the compiled kernel).

Bright amplitudes: ``a[n1]`` on |1, n1> and ``b[n2]`` on |0, n2>. In the
interaction picture

    i da/dt = B(t) b,     i db/dt = B(t)^H a,

with B(t) = lam * P1(t) C P2(t)^*, P_k(t) = diag(exp(i e_k t)).
"""
import numpy as np


def _rhs(C, CH, e1, e2, lam, t, a, b):
    p1 = np.exp(1j * e1 * t)
    p2 = np.exp(1j * e2 * t)
    da = (-1j * lam) * p1 * (C @ (p2.conj() * b))
    db = (-1j * lam) * p2 * (CH @ (p1.conj() * a))
    return da, db


def rk4_bright(C, e1, e2, lam, a, b, t0, dt, nsteps):
    """Advance ``a`` and ``b`` in place by ``nsteps`` classical RK4 steps."""
    CH = C.conj().T
    t = t0
    h2 = 0.5 * dt
    for k in range(nsteps):
        t = t0 + k * dt
        k1a, k1b = _rhs(C, CH, e1, e2, lam, t, a, b)
        k2a, k2b = _rhs(C, CH, e1, e2, lam, t + h2, a + h2 * k1a, b + h2 * k1b)
        k3a, k3b = _rhs(C, CH, e1, e2, lam, t + h2, a + h2 * k2a, b + h2 * k2b)
        k4a, k4b = _rhs(C, CH, e1, e2, lam, t + dt, a + dt * k3a, b + dt * k3b)
        a += (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        b += (dt / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
