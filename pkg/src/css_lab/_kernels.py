"""Compiled right-hand side for the time stepper.

Same arithmetic as :meth:`css_lab.evolution.Stencil.gradient`, fused into two
sweeps.  Import fails cleanly when numba is absent; callers fall back to the
numpy path.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def gradient(u, m, h, inv_h, rc, inv_rc, wr, inv_wr, out):
    n = u.shape[0]
    cells = np.empty(n - 1)
    for j in range(n):
        out[j] = 0.0
    cum = 0.0
    for c in range(n - 1):
        ua = u[c]
        ub = u[c + 1]
        cum += wr[c] * (ua.real * ua.real + ua.imag * ua.imag)
        coef = m - 0.5 * cum
        avg = 0.5 * (ub + ua)
        d = (ub - ua) * inv_h[c] - coef * avg * inv_rc[c]
        rd = rc[c] * d
        half = 0.5 * h[c] * coef * d
        out[c + 1] += rd - half
        out[c] -= rd + half
        cells[c] = h[c] * (d.real * avg.real + d.imag * avg.imag)
    s = 0.0
    out[n - 1] = out[n - 1] * inv_wr[n - 1]
    for j in range(n - 2, 0, -1):
        s += cells[j]
        out[j] = out[j] * inv_wr[j] + s * u[j]
    out[0] = 0.0


@njit(cache=True)
def rk4(u, dt, m, h, inv_h, rc, inv_rc, wr, inv_wr):
    n = u.shape[0]
    k = np.empty(n, dtype=np.complex128)
    acc = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    # rhs = -i * gradient
    gradient(u, m, h, inv_h, rc, inv_rc, wr, inv_wr, k)
    for j in range(n):
        k[j] = -1j * k[j]
        acc[j] = k[j]
        tmp[j] = u[j] + 0.5 * dt * k[j]
    gradient(tmp, m, h, inv_h, rc, inv_rc, wr, inv_wr, k)
    for j in range(n):
        k[j] = -1j * k[j]
        acc[j] += 2.0 * k[j]
        tmp[j] = u[j] + 0.5 * dt * k[j]
    gradient(tmp, m, h, inv_h, rc, inv_rc, wr, inv_wr, k)
    for j in range(n):
        k[j] = -1j * k[j]
        acc[j] += 2.0 * k[j]
        tmp[j] = u[j] + dt * k[j]
    gradient(tmp, m, h, inv_h, rc, inv_rc, wr, inv_wr, k)
    out = np.empty(n, dtype=np.complex128)
    for j in range(n):
        out[j] = u[j] + (dt / 6.0) * (acc[j] - 1j * k[j])
    return out
