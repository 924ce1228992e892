"""Numba-compiled twins of the kernels in ``_numpy``."""

import numpy as np
from numba import njit

QUAD, TRI_UPPER, TRI_LOWER = 0, 1, 2


@njit(cache=True)
def legendre_colat_roots(n, tol=1e-15, maxiter=100):
    nroots = (n + 1) // 2
    t = np.empty(nroots)
    for k in range(nroots):
        tk = np.pi * (k + 0.75) / (n + 0.5)
        for _ in range(maxiter):
            s = 2.0 * np.sin(0.5 * tk) ** 2
            p = 1.0 - s
            d = -s
            for j in range(1, n):
                d = (j * d - (2 * j + 1) * s * p) / (j + 1)
                p = p + d
            dt = p / (n * (d - s * p) / np.sin(tk))
            tk -= dt
            if abs(dt) < tol:
                break
        t[k] = tk
    return t


@njit(cache=True)
def _legendre_eval(n, x):
    out = np.empty_like(x)
    for k in range(x.size):
        xk = x[k]
        p0 = 1.0
        p1 = xk
        if n == 0:
            p1 = 1.0
        for j in range(1, n):
            p0, p1 = p1, ((2 * j + 1) * xk * p1 - j * p0) / (j + 1)
        out[k] = p1
    return out


def legendre_eval(n, x):
    x = np.asarray(x, dtype=np.float64)
    return _legendre_eval(n, x.ravel()).reshape(x.shape)


@njit(cache=True)
def _tessellate_strip(xa, xb, periodic):
    na = len(xa) - (1 if periodic else 0)
    nb = len(xb) - (1 if periodic else 0)
    enda = na if periodic else na - 1
    endb = nb if periodic else nb - 1
    tol = 0.5 / max(na, nb)
    out = np.empty((enda + endb, 3), dtype=np.int64)
    m = 0
    ia = 0
    ib = 0
    while ia < enda or ib < endb:
        if ia >= enda:
            kind = TRI_LOWER
        elif ib >= endb:
            kind = TRI_UPPER
        elif abs(xa[ia + 1] - xb[ib + 1]) < tol:
            kind = QUAD
        elif xa[ia + 1] <= xb[ib + 1]:
            kind = TRI_UPPER
        else:
            kind = TRI_LOWER
        out[m, 0] = kind
        out[m, 1] = ia
        out[m, 2] = ib
        m += 1
        if kind != TRI_LOWER:
            ia += 1
        if kind != TRI_UPPER:
            ib += 1
    return out[:m].copy()


def tessellate_strip(xa, xb, periodic):
    return _tessellate_strip(np.asarray(xa, dtype=np.float64), np.asarray(xb, dtype=np.float64), bool(periodic))


@njit(cache=True)
def accumulate_gradient(n0, n1, phi, normals, out):
    nlev = phi.shape[1]
    for e in range(n0.size):
        a = n0[e]
        b = n1[e]
        sx = normals[e, 0]
        sy = normals[e, 1]
        for lev in range(nlev):
            half = 0.5 * (phi[b, lev] - phi[a, lev])
            out[a, lev, 0] += half * sx
            out[a, lev, 1] += half * sy
            out[b, lev, 0] += half * sx
            out[b, lev, 1] += half * sy


@njit(cache=True)
def accumulate_flux(n0, n1, fx, fy, normals, out):
    nlev = fx.shape[1]
    for e in range(n0.size):
        a = n0[e]
        b = n1[e]
        sx = normals[e, 0]
        sy = normals[e, 1]
        for lev in range(nlev):
            flux = 0.5 * ((fx[a, lev] + fx[b, lev]) * sx + (fy[a, lev] + fy[b, lev]) * sy)
            out[a, lev] += flux
            out[b, lev] -= flux
