"""Compiled kernels for the symmetric eigensolver."""
import math

import numba
import numpy as np

DEFLATE = 1e-15


@numba.njit(cache=True, nogil=True)
def tridiagonalize(a):
    """Householder reduction of symmetric ``a`` (overwritten, lower triangle
    used) to tridiagonal form. Returns (diagonal, off-diagonal)."""
    n = a.shape[0]
    d = np.empty(n)
    e = np.zeros(max(n - 1, 0))
    v = np.zeros(n)
    p = np.zeros(n)
    for k in range(n - 2):
        m0 = k + 1
        s = 0.0
        for i in range(m0, n):
            s += a[i, k] * a[i, k]
        x0 = a[m0, k]
        if s - x0 * x0 == 0.0:
            e[k] = x0
            continue
        norm = math.sqrt(s)
        alpha = -norm if x0 >= 0 else norm
        for i in range(m0, n):
            v[i] = a[i, k]
            p[i] = 0.0
        v[m0] = x0 - alpha
        beta = 2.0 / (s - x0 * x0 + v[m0] * v[m0])
        for i in range(m0, n):
            vi = v[i]
            acc = 0.0
            for j in range(m0, i):
                aij = a[i, j]
                acc += aij * v[j]
                p[j] += aij * vi
            p[i] += acc + a[i, i] * vi
        kk = 0.0
        for i in range(m0, n):
            p[i] *= beta
            kk += v[i] * p[i]
        kk *= 0.5 * beta
        for i in range(m0, n):
            p[i] -= kk * v[i]
        for i in range(m0, n):
            vi = v[i]
            pi = p[i]
            for j in range(m0, i + 1):
                a[i, j] -= vi * p[j] + pi * v[j]
        e[k] = alpha
    for i in range(n):
        d[i] = a[i, i]
    if n >= 2:
        e[n - 2] = a[n - 1, n - 2]
    return d, e


@numba.njit(cache=True, nogil=True)
def ql_implicit(d, e, max_sweeps):
    """Eigenvalues of the tridiagonal (d, e) by implicit QL with Wilkinson
    shifts; ``d`` is overwritten. Returns False if some eigenvalue needs more
    than ``max_sweeps`` sweeps."""
    n = d.shape[0]
    ee = np.zeros(n)
    for i in range(n - 1):
        ee[i] = e[i]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                if abs(ee[m]) <= DEFLATE * (abs(d[m]) + abs(d[m + 1])):
                    break
                m += 1
            if m == l:
                break
            if it == max_sweeps:
                return False
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * ee[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + ee[l] / (g + (r if g >= 0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            restart = False
            while i >= l:
                f = s * ee[i]
                b = c * ee[i]
                r = math.hypot(f, g)
                ee[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    ee[m] = 0.0
                    restart = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if restart:
                continue
            d[l] -= p
            ee[l] = g
            ee[m] = 0.0
    return True


@numba.njit(cache=True, nogil=True)
def block_eigvals(blocks, max_sweeps):
    """Ascending eigenvalues of each symmetric block in a (B, m, m) stack."""
    nb, m = blocks.shape[0], blocks.shape[1]
    out = np.empty((nb, m))
    work = np.empty((m, m))
    for b in range(nb):
        for i in range(m):
            for j in range(m):
                work[i, j] = blocks[b, i, j]
        d, e = tridiagonalize(work)
        if not ql_implicit(d, e, max_sweeps):
            out[b, 0] = np.nan
            continue
        out[b] = np.sort(d)
    return out
