"""Pure numpy implementations of the hot loops.

Each function here has a twin with the same signature in ``_numba``.
"""

import numpy as np

QUAD, TRI_UPPER, TRI_LOWER = 0, 1, 2


def legendre_colat_roots(n, tol=1e-15, maxiter=100):
    """Colatitudes (radians, ascending) of the northern roots of P_n.

    Newton iteration is carried out in the colatitude ``t`` with
    ``s = 1 - cos(t)`` driving the recurrence, which keeps the roots near
    the poles accurate to the last bit of ``t``.
    """
    k = np.arange((n + 1) // 2, dtype=np.float64)
    t = np.pi * (k + 0.75) / (n + 0.5)
    # each root stops on its own criterion, as in the scalar twin
    active = np.ones(t.size, dtype=bool)
    for _ in range(maxiter):
        ta = t[active]
        s = 2.0 * np.sin(0.5 * ta) ** 2
        p = 1.0 - s
        d = -s
        for j in range(1, n):
            d = (j * d - (2 * j + 1) * s * p) / (j + 1)
            p = p + d
        dp = n * (d - s * p) / np.sin(ta)
        dt = p / dp
        t[active] = ta - dt
        active[active] = np.abs(dt) >= tol
        if not active.any():
            break
    return t


def legendre_eval(n, x):
    """P_n(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=np.float64)
    p0 = np.ones_like(x)
    if n == 0:
        return p0
    p1 = x.copy()
    for j in range(1, n):
        p0, p1 = p1, ((2 * j + 1) * x * p1 - j * p0) / (j + 1)
    return p1


def tessellate_strip(xa, xb, periodic):
    """Walk two parallels and emit elements between them.

    ``xa`` and ``xb`` are normalized positions (x/360) of the points on the
    upper and lower parallel.  For periodic strips each array carries one
    extra trailing entry, the first point shifted by one period.

    Returns an ``(m, 3)`` int array of ``(kind, ia, ib)`` where kind is
    QUAD, TRI_UPPER (advances the upper cursor) or TRI_LOWER.
    """
    na = len(xa) - (1 if periodic else 0)
    nb = len(xb) - (1 if periodic else 0)
    enda = na if periodic else na - 1
    endb = nb if periodic else nb - 1
    tol = 0.5 / max(na, nb)
    out = []
    ia = ib = 0
    while ia < enda or ib < endb:
        if ia >= enda:
            out.append((TRI_LOWER, ia, ib))
            ib += 1
            continue
        if ib >= endb:
            out.append((TRI_UPPER, ia, ib))
            ia += 1
            continue
        xan = xa[ia + 1]
        xbn = xb[ib + 1]
        if abs(xan - xbn) < tol:
            out.append((QUAD, ia, ib))
            ia += 1
            ib += 1
        elif xan <= xbn:
            out.append((TRI_UPPER, ia, ib))
            ia += 1
        else:
            out.append((TRI_LOWER, ia, ib))
            ib += 1
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def accumulate_gradient(n0, n1, phi, normals, out):
    """out[i] += sum over edges of (phi_j - phi_i)/2 * S_e for both edge ends.

    phi: (nodes, L); normals: (edges, 2); out: (nodes, L, 2), accumulated in place.
    """
    half = 0.5 * (phi[n1] - phi[n0])
    contrib = half[:, :, None] * normals[:, None, :]
    np.add.at(out, n0, contrib)
    np.add.at(out, n1, contrib)


def accumulate_flux(n0, n1, fx, fy, normals, out):
    """out[n0] += F_e . S_e, out[n1] -= F_e . S_e with F_e the edge average.

    fx, fy: (nodes, L); normals: (edges, 2); out: (nodes, L).
    """
    flux = 0.5 * ((fx[n0] + fx[n1]) * normals[:, 0:1] + (fy[n0] + fy[n1]) * normals[:, 1:2])
    np.add.at(out, n0, flux)
    np.subtract.at(out, n1, flux)
