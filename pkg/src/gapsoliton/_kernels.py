"""Compiled inner loops for the Maxwell-Bloch leapfrog update.

All loops run with a fixed order and no reductions, so results do not depend
on threading.
"""

import numba
import numpy as np

SCHEME_RK4 = 0
SCHEME_CN = 1
BOUNDARY_MUR1 = 0
BOUNDARY_PEC = 1


@numba.njit(cache=True, inline="always")
def bloch_rk4(u0, v0, w0, e, h, drive, g1, g2):
    re = drive * e
    k1u = -g2 * u0 - v0
    k1v = -g2 * v0 + u0 + re * w0
    k1w = -g1 * (w0 + 1.0) - re * v0
    uu = u0 + 0.5 * h * k1u
    vv = v0 + 0.5 * h * k1v
    ww = w0 + 0.5 * h * k1w
    k2u = -g2 * uu - vv
    k2v = -g2 * vv + uu + re * ww
    k2w = -g1 * (ww + 1.0) - re * vv
    uu = u0 + 0.5 * h * k2u
    vv = v0 + 0.5 * h * k2v
    ww = w0 + 0.5 * h * k2w
    k3u = -g2 * uu - vv
    k3v = -g2 * vv + uu + re * ww
    k3w = -g1 * (ww + 1.0) - re * vv
    uu = u0 + h * k3u
    vv = v0 + h * k3v
    ww = w0 + h * k3w
    k4u = -g2 * uu - vv
    k4v = -g2 * vv + uu + re * ww
    k4w = -g1 * (ww + 1.0) - re * vv
    c = h / 6.0
    return (
        u0 + c * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        v0 + c * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        w0 + c * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
    )


@numba.njit(cache=True, inline="always")
def bloch_cn(u0, v0, w0, e, h, drive, g1, g2):
    # (I - h/2 M) x1 = (I + h/2 M) x0 + h b, b = (0, 0, -g1)
    re = drive * e
    a = 0.5 * h
    ru = u0 + a * (-g2 * u0 - v0)
    rv = v0 + a * (-g2 * v0 + u0 + re * w0)
    rw = w0 + a * (-g1 * w0 - re * v0) - h * g1
    # A = I - a M; M = [[-g2, -1, 0], [1, -g2, re], [0, -re, -g1]]
    p = 1.0 + a * g2
    q = 1.0 + a * g1
    s = a * re
    # A = [[p, a, 0], [-a, p, -s], [0, s, q]]
    det = p * (p * q + s * s) - a * (-a * q)
    un = (ru * (p * q + s * s) - a * (rv * q + s * rw)) / det
    vn = (p * (rv * q + s * rw) + a * q * ru) / det
    wn = (rw - s * vn) / q
    return un, vn, wn


@numba.njit(cache=True)
def bloch_update_array(u, v, w, e, h, drive, g1, g2, scheme):
    """Advance Bloch vectors one step with the field held at ``e``."""
    n = u.shape[0]
    uo = np.empty(n)
    vo = np.empty(n)
    wo = np.empty(n)
    for i in range(n):
        if scheme == SCHEME_RK4:
            uo[i], vo[i], wo[i] = bloch_rk4(u[i], v[i], w[i], e[i], h, drive, g1, g2)
        else:
            uo[i], vo[i], wo[i] = bloch_cn(u[i], v[i], w[i], e[i], h, drive, g1, g2)
    return uo, vo, wo


@numba.njit(cache=True)
def advance(E, H, u, v, w, coupling, medium_idx, courant, h, drive, g1, g2,
            scheme, boundary, nsteps, step0, probe_idx, probe_buf, probe_stride):
    """Advance the state in place by ``nsteps`` leapfrog steps.

    Probe samples are written to ``probe_buf[s // probe_stride]`` after every
    global step ``s`` divisible by ``probe_stride``.
    """
    n = E.shape[0]
    m = (courant - 1.0) / (courant + 1.0)
    nprobe = probe_idx.shape[0]
    for j in range(nsteps):
        for i in range(n - 1):
            H[i] -= courant * (E[i + 1] - E[i])
        e0 = E[0]
        e1 = E[1]
        ea = E[n - 1]
        eb = E[n - 2]
        for i in range(1, n - 1):
            E[i] -= courant * (H[i] - H[i - 1])
        for k in range(medium_idx.shape[0]):
            i = medium_idx[k]
            a = coupling[i]
            u0 = u[i]
            v0 = v[i]
            w0 = w[i]
            curl = courant * (H[i] - H[i - 1])
            # E^n + half the curl-H and source increments
            eh = E[i] + 0.5 * curl - 0.5 * a * h * (-g2 * u0 - v0)
            if scheme == SCHEME_RK4:
                un, vn, wn = bloch_rk4(u0, v0, w0, eh, h, drive, g1, g2)
            else:
                un, vn, wn = bloch_cn(u0, v0, w0, eh, h, drive, g1, g2)
            E[i] -= a * (un - u0)
            u[i] = un
            v[i] = vn
            w[i] = wn
        if boundary == BOUNDARY_MUR1:
            E[0] = e1 + m * (E[1] - e0)
            E[n - 1] = eb + m * (E[n - 2] - ea)
        else:
            E[0] = 0.0
            E[n - 1] = 0.0
        s = step0 + j + 1
        if nprobe > 0 and s % probe_stride == 0:
            row = s // probe_stride
            for p in range(nprobe):
                probe_buf[row, p] = E[probe_idx[p]]
