"""Compiled inner loops.  Array layout: ``coef[:, j]`` holds the twelve update
constants of node j in the order of ``NodeCoefficients.FIELDS``."""

import numba
import numpy as np


@numba.njit(cache=True)
def advance(u, y, coef, lam, a, nsteps):
    """Advance ``nsteps`` levels in place.

    ``u`` and ``y`` have shape (2, N+2): row 0 is level n-1, row 1 level n.
    Returns False if the final level holds a non-finite value.
    """
    m = u.shape[1]
    up = u[0].copy()
    uc = u[1].copy()
    yp = y[0].copy()
    yc = y[1].copy()
    un = np.zeros(m)
    yn = np.zeros(m)
    cu = 1.0 - a * lam
    cy = 1.0 - lam
    for _ in range(nsteps):
        for j in range(1, m - 1):
            us = uc[j + 1] + uc[j - 1]
            ys = yc[j + 1] + yc[j - 1]
            un[j] = (cu * coef[0, j] * uc[j] + lam * coef[1, j] * us + coef[2, j] * up[j]
                     - cy * coef[3, j] * yc[j] - lam * coef[4, j] * ys + coef[5, j] * yp[j])
            yn[j] = (cy * coef[6, j] * yc[j] + lam * coef[7, j] * ys + coef[8, j] * yp[j]
                     + cu * coef[9, j] * uc[j] + lam * coef[10, j] * us + coef[11, j] * up[j])
        up, uc, un = uc, un, up
        yp, yc, yn = yc, yn, yp
    # one finiteness sweep per call; callers choose the chunk size
    finite = True
    for j in range(m):
        if not (np.isfinite(uc[j]) and np.isfinite(yc[j])):
            finite = False
            break
    u[0, :] = up
    u[1, :] = uc
    y[0, :] = yp
    y[1, :] = yc
    return finite


@numba.njit(cache=True)
def energy_terms(u_prev, u_curr, u_next, y_prev, y_curr, y_next, c, dt, dx, a):
    """(e_ku, e_pu, e_ky, e_py, damping_sum), each summed in ascending j."""
    m = u_curr.shape[0]
    s_ku = 0.0
    s_ky = 0.0
    s_d = 0.0
    for j in range(1, m - 1):
        s_ku += ((u_next[j] - u_curr[j]) / dt) ** 2
        s_ky += ((y_next[j] - y_curr[j]) / dt) ** 2
        s_d += c[j] * ((u_next[j] - u_prev[j]) / (2.0 * dt)) ** 2
    s_pu = 0.0
    s_py = 0.0
    for j in range(m - 1):
        s_pu += ((u_curr[j + 1] - u_curr[j]) / dx) * ((u_next[j + 1] - u_next[j]) / dx)
        s_py += ((y_curr[j + 1] - y_curr[j]) / dx) * ((y_next[j + 1] - y_next[j]) / dx)
    return 0.5 * s_ku, 0.5 * a * s_pu, 0.5 * s_ky, 0.5 * s_py, dt * s_d
