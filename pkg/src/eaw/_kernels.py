"""Numeric inner loops with a numba path and a pure-numpy path.

Set ``EAW_DISABLE_NUMBA=1`` (before import) to force the numpy path.  Both
paths are importable explicitly as ``<name>_numba`` / ``<name>_numpy`` so the
tests and the benchmark can compare them.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_ENABLED = numba is not None and os.environ.get("EAW_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes")


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True)(fn)


# --------------------------------------------------------------------------
# Grassmann monomials as bitmasks (bit i-1 <-> generator xi_i)

def merge_sign(a: int, b: int) -> int:
    """Sign of reordering xi_a * xi_b into increasing order; 0 if they overlap."""
    if a & b:
        return 0
    swaps = 0
    while b:
        low = b & -b
        swaps += (a & ~((low << 1) - 1)).bit_count()
        b ^= low
    return -1 if swaps & 1 else 1


@_njit
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@_njit
def _merge_sign_nb(a, b):
    if a & b:
        return 0
    swaps = 0
    while b:
        low = b & -b
        swaps += _popcount(a & ~((low << 1) - 1))
        b ^= low
    return -1 if swaps & 1 else 1


@_njit
def grassmann_tables_numba(q):
    size = 1 << q
    sign = np.zeros((size, size), dtype=np.int8)
    mask = np.zeros((size, size), dtype=np.int64)
    for a in range(size):
        for b in range(size):
            sign[a, b] = _merge_sign_nb(a, b)
            mask[a, b] = a | b
    return sign, mask


def _popcount_array(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x >>= 1
    return c


def grassmann_tables_numpy(q: int):
    size = 1 << q
    a = np.arange(size, dtype=np.int64)[:, None]
    b = np.arange(size, dtype=np.int64)[None, :]
    swaps = np.zeros((size, size), dtype=np.int64)
    for j in range(q):
        has_j = (b >> j) & 1
        above = _popcount_array(a >> (j + 1))
        swaps = swaps + has_j * above
    sign = np.where(swaps % 2 == 1, -1, 1).astype(np.int8)
    sign[(a & b) != 0] = 0
    return sign, np.broadcast_to(a | b, (size, size)).copy()


@_njit
def central_flags_numba(q):
    size = 1 << q
    out = np.ones(size, dtype=np.bool_)
    for m in range(size):
        for b in range(size):
            if _merge_sign_nb(m, b) != _merge_sign_nb(b, m):
                out[m] = False
                break
    return out


def central_flags_numpy(q: int) -> np.ndarray:
    sign, _ = grassmann_tables_numpy(q)
    return np.all(sign == sign.T, axis=1)


@_njit
def grassmann_mul_dense_numba(x, y, sign, mask):
    size = x.shape[0]
    out = np.zeros(size, dtype=x.dtype)
    for a in range(size):
        if x[a] == 0:
            continue
        for b in range(size):
            s = sign[a, b]
            if s != 0 and y[b] != 0:
                out[mask[a, b]] += s * x[a] * y[b]
    return out


def grassmann_mul_dense_numpy(x, y, sign, mask):
    prod = sign * np.outer(x, y)
    out = np.zeros(x.shape[0], dtype=np.result_type(x, y))
    np.add.at(out, mask.ravel(), prod.ravel().astype(out.dtype))
    return out


# --------------------------------------------------------------------------
# Curvature from sampled metric derivatives (finite-difference oracle)

@_njit
def curvature_numba(g, dg, ddg):
    npts, n, _ = g.shape
    gamma = np.zeros((npts, n, n, n))
    riem = np.zeros((npts, n, n, n, n))
    ric = np.zeros((npts, n, n))
    scal = np.zeros(npts)
    for p in range(npts):
        gi = np.linalg.inv(g[p])
        dgi = np.zeros((n, n, n))
        for a in range(n):
            dgi[a] = -gi @ dg[p, a] @ gi
        low = np.zeros((n, n, n))       # low[l, i, j] = Gamma_{l i j}
        dlow = np.zeros((n, n, n, n))   # dlow[a, l, i, j]
        for l in range(n):
            for i in range(n):
                for j in range(n):
                    low[l, i, j] = 0.5 * (dg[p, i, j, l] + dg[p, j, i, l] - dg[p, l, i, j])
                    for a in range(n):
                        dlow[a, l, i, j] = 0.5 * (ddg[p, a, i, j, l] + ddg[p, a, j, i, l] - ddg[p, a, l, i, j])
        dgam = np.zeros((n, n, n, n))   # dgam[a, k, i, j] = d_a Gamma^k_ij
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for l in range(n):
                        s += gi[k, l] * low[l, i, j]
                    gamma[p, k, i, j] = s
                    for a in range(n):
                        t = 0.0
                        for l in range(n):
                            t += dgi[a, k, l] * low[l, i, j] + gi[k, l] * dlow[a, l, i, j]
                        dgam[a, k, i, j] = t
        for k in range(n):
            for l in range(n):
                for i in range(n):
                    for j in range(n):
                        s = dgam[i, k, j, l] - dgam[j, k, i, l]
                        for m in range(n):
                            s += gamma[p, k, i, m] * gamma[p, m, j, l] - gamma[p, k, j, m] * gamma[p, m, i, l]
                        riem[p, k, l, i, j] = s
        for i in range(n):
            for j in range(n):
                s = 0.0
                for k in range(n):
                    s += riem[p, k, i, k, j]
                ric[p, i, j] = s
        s = 0.0
        for i in range(n):
            for j in range(n):
                s += gi[i, j] * ric[p, i, j]
        scal[p] = s
    return gamma, riem, ric, scal


def curvature_numpy(g, dg, ddg):
    gi = np.linalg.inv(g)
    dgi = -np.einsum("pkl,palm,pmj->pakj", gi, dg, gi)
    # dg[p, a, i, j] = d_a g_ij
    low = 0.5 * (np.einsum("pijl->plij", dg) + np.einsum("pjil->plij", dg) - dg)
    dlow = 0.5 * (np.einsum("paijl->palij", ddg) + np.einsum("pajil->palij", ddg) - ddg)
    gamma = np.einsum("pkl,plij->pkij", gi, low)
    dgam = np.einsum("pakl,plij->pakij", dgi, low) + np.einsum("pkl,palij->pakij", gi, dlow)
    riem = (
        np.einsum("pikjl->pklij", dgam)
        - np.einsum("pjkil->pklij", dgam)
        + np.einsum("pkim,pmjl->pklij", gamma, gamma)
        - np.einsum("pkjm,pmil->pklij", gamma, gamma)
    )
    ric = np.einsum("pkikj->pij", riem)
    scal = np.einsum("pij,pij->p", gi, ric)
    return gamma, riem, ric, scal


if NUMBA_ENABLED:
    grassmann_tables = grassmann_tables_numba
    central_flags = central_flags_numba
    grassmann_mul_dense = grassmann_mul_dense_numba
    curvature = curvature_numba
else:
    grassmann_tables = grassmann_tables_numpy
    central_flags = central_flags_numpy
    grassmann_mul_dense = grassmann_mul_dense_numpy
    curvature = curvature_numpy
