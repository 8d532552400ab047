"""Compiled inner loops for the dense flow solver.

Plain sequential loops (no fastmath, no parallel reductions), so results
are bit-reproducible for identical inputs.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _clamp(i, n):
    if i < 0:
        return 0
    if i >= n:
        return n - 1
    return i


@njit(cache=True)
def _box_sum_row(src, radius, out):
    """Clamped box sum of width ``2 radius + 1`` along one row."""
    w = src.shape[0]
    acc = 0.0
    for k in range(-radius, radius + 1):
        acc += src[_clamp(k, w)]
    out[0] = acc
    for x in range(1, w):
        acc += src[_clamp(x + radius, w)] - src[_clamp(x - radius - 1, w)]
        out[x] = acc


@njit(cache=True)
def displacement_kernel(a11, a12, a22, b1, b2, a11n, a12n, a22n, b1n, b2n, pu, pv, avg_radius, eps):
    """Fused lookup, normal-equation assembly, box summation and 2x2 solve.

    Arguments ending in ``n`` are the second frame's expansion. The prior
    lookup rounds half up: ``floor(x + u + 0.5)``.
    """
    h, w = a11.shape
    # rows[c, y, x]: horizontally box-summed terms
    rows = np.empty((5, h, w))
    line = np.empty((5, w))
    for y in range(h):
        for x in range(w):
            u0 = pu[y, x]
            v0 = pv[y, x]
            xi = _clamp(int(np.floor(x + u0 + 0.5)), w)
            yi = _clamp(int(np.floor(y + v0 + 0.5)), h)
            m11 = 0.5 * (a11[y, x] + a11n[yi, xi])
            m12 = 0.5 * (a12[y, x] + a12n[yi, xi])
            m22 = 0.5 * (a22[y, x] + a22n[yi, xi])
            # the offset actually looked up, so the linearization is exact for quadratics
            ku = float(xi - x)
            kv = float(yi - y)
            d1 = -0.5 * (b1n[yi, xi] - b1[y, x]) + m11 * ku + m12 * kv
            d2 = -0.5 * (b2n[yi, xi] - b2[y, x]) + m12 * ku + m22 * kv
            s12 = m12 * m12
            line[0, x] = m11 * m11 + s12
            line[1, x] = m12 * (m11 + m22)
            line[2, x] = m22 * m22 + s12
            line[3, x] = m11 * d1 + m12 * d2
            line[4, x] = m12 * d1 + m22 * d2
        for c in range(5):
            _box_sum_row(line[c], avg_radius, rows[c, y])

    u = np.empty((h, w))
    v = np.empty((h, w))
    acc = np.zeros((5, w))
    for k in range(-avg_radius, avg_radius + 1):
        r = _clamp(k, h)
        for c in range(5):
            for x in range(w):
                acc[c, x] += rows[c, r, x]
    for y in range(h):
        if y > 0:
            add = _clamp(y + avg_radius, h)
            sub = _clamp(y - avg_radius - 1, h)
            for c in range(5):
                for x in range(w):
                    acc[c, x] += rows[c, add, x] - rows[c, sub, x]
        for x in range(w):
            g11 = acc[0, x] + eps
            g12 = acc[1, x]
            g22 = acc[2, x] + eps
            h1 = acc[3, x]
            h2 = acc[4, x]
            det = g11 * g22 - g12 * g12
            u[y, x] = (g22 * h1 - g12 * h2) / det
            v[y, x] = (g11 * h2 - g12 * h1) / det
    return u, v


@njit(cache=True)
def expansion_kernel(img, k0, k1, k2, ginv):
    """Separable moment correlations followed by the constant 6x6 solve.

    Returns a ``(6, h, w)`` stack of coefficients in basis order
    ``{1, x, y, x^2, y^2, xy}``.
    """
    h, w = img.shape
    n = k0.shape[0]
    radius = n // 2
    r0 = np.empty((h, w))
    r1 = np.empty((h, w))
    r2 = np.empty((h, w))
    padded = np.empty(w + 2 * radius)
    for y in range(h):
        for x in range(w + 2 * radius):
            padded[x] = img[y, _clamp(x - radius, w)]
        for x in range(w):
            s0 = 0.0
            s1 = 0.0
            s2 = 0.0
            for j in range(n):
                val = padded[x + j]
                s0 += k0[j] * val
                s1 += k1[j] * val
                s2 += k2[j] * val
            r0[y, x] = s0
            r1[y, x] = s1
            r2[y, x] = s2
    out = np.empty((6, h, w))
    m = np.empty((6, w))
    for y in range(h):
        m[:, :] = 0.0
        for j in range(n):
            yy = _clamp(y + j - radius, h)
            w0 = k0[j]
            w1 = k1[j]
            w2 = k2[j]
            for x in range(w):
                c0 = r0[yy, x]
                c1 = r1[yy, x]
                m[0, x] += w0 * c0
                m[1, x] += w0 * c1
                m[2, x] += w1 * c0
                m[3, x] += w0 * r2[yy, x]
                m[4, x] += w2 * c0
                m[5, x] += w1 * c1
        for i in range(6):
            for x in range(w):
                out[i, y, x] = 0.0
            for j in range(6):
                gij = ginv[i, j]
                if gij != 0.0:
                    for x in range(w):
                        out[i, y, x] += gij * m[j, x]
    return out
