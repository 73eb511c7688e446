"""Finite-difference curvature oracle.

Independent of the symbolic route: metric components are only ever
evaluated, never differentiated symbolically.  Derivatives come from
fourth-order central differences, then ``_kernels.curvature`` does the contractions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .expr import DEFAULT_SEED, compile_numeric
from .lorentz import Metric

H_FIRST = 1e-3
H_SECOND = 1e-3


@dataclass(frozen=True)
class NumericCurvature:
    points: np.ndarray
    params: np.ndarray
    g: np.ndarray
    gamma: np.ndarray   # [p, k, i, j]
    riemann: np.ndarray  # [p, k, l, i, j]
    ricci: np.ndarray
    scalar: np.ndarray


def _metric_sampler(g: Metric):
    n = g.dim
    fns = {(i, j): compile_numeric(g[i, j], g.chart) for i in range(n) for j in range(i, n)}

    def at(pts, prm):
        out = np.empty((pts.shape[0], n, n))
        for (i, j), f in fns.items():
            out[:, i, j] = out[:, j, i] = f(pts, prm)
        return out

    return at


# fourth-order central stencils: offsets and weights
_D1 = ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12))
_D2 = ((-2, -1 / 12), (-1, 16 / 12), (0, -30 / 12), (1, 16 / 12), (2, -1 / 12))


def metric_derivatives(g: Metric, pts: np.ndarray, prm: np.ndarray, h1: float = H_FIRST, h2: float = H_SECOND):
    """Return ``(g, dg, ddg)`` with ``dg[p,a,i,j] = d_a g_ij`` and ``ddg[p,a,b,i,j]``.

    Steps are relative to ``max(1, |x_a|)``.
    """
    at = _metric_sampler(g)
    n, npts = g.dim, pts.shape[0]
    scale = np.maximum(1.0, np.abs(pts))
    g0 = at(pts, prm)
    dg = np.zeros((npts, n, n, n))
    ddg = np.zeros((npts, n, n, n, n))

    def shifted(offsets):
        q = pts.copy()
        for a, s in offsets:
            q[:, a] += s * scale[:, a]
        return g0 if not offsets else at(q, prm)

    for a in range(n):
        s1 = (h1 * scale[:, a])[:, None, None]
        for m, w in _D1:
            dg[:, a] += w * shifted([(a, m * h1)])
        dg[:, a] /= s1
        sa = (h2 * scale[:, a])[:, None, None]
        for m, w in _D2:
            ddg[:, a, a] += w * shifted([(a, m * h2)] if m else [])
        ddg[:, a, a] /= sa ** 2
        for b in range(a + 1, n):
            sb = (h2 * scale[:, b])[:, None, None]
            acc = np.zeros((npts, n, n))
            for ma, wa in _D1:
                for mb, wb in _D1:
                    acc += wa * wb * shifted([(a, ma * h2), (b, mb * h2)])
            ddg[:, a, b] = ddg[:, b, a] = acc / (sa * sb)
    return g0, dg, ddg


def numeric_curvature(g: Metric, samples: int = 64, seed: int = DEFAULT_SEED, pts=None, prm=None) -> NumericCurvature:
    if pts is None:
        pts, prm = g.chart.sample(samples, seed)
    elif prm is None:
        prm = g.chart.midpoint_params_array(pts.shape[0])
    g0, dg, ddg = metric_derivatives(g, pts, prm)
    gamma, riem, ric, scal = _kernels.curvature(g0, dg, ddg)
    return NumericCurvature(pts, prm, g0, gamma, riem, ric, scal)


def evaluate_tensor(tensor, g: Metric, pts: np.ndarray, prm: np.ndarray) -> np.ndarray:
    """Evaluate a nested tuple of expressions at every sample point; shape ``(p, *tensor_shape)``."""
    arr = np.array(tensor, dtype=object)
    out = np.empty((pts.shape[0],) + arr.shape)
    for idx in np.ndindex(arr.shape):
        out[(slice(None),) + idx] = compile_numeric(arr[idx], g.chart)(pts, prm)
    return out


def max_relative_error(symbolic: np.ndarray, numeric: np.ndarray, floor: float | None = None) -> float:
    """``max |s - n| / max(|s|, floor)``; ``floor`` defaults to the tensor's overall magnitude."""
    if floor is None:
        floor = max(float(np.max(np.abs(numeric))), 1.0)
    return float(np.max(np.abs(symbolic - numeric) / np.maximum(np.abs(symbolic), floor)))


def estimate_einstein_constant(nc: NumericCurvature) -> tuple[np.ndarray, float]:
    """Per-point least-squares ``Lambda`` in ``Ric = Lambda g`` and the worst relative misfit.

    Estimates are per sample because ``Lambda`` may depend on the chart parameters.
    """
    lam = np.einsum("pij,pij->p", nc.ricci, nc.g) / np.einsum("pij,pij->p", nc.g, nc.g)
    resid = np.abs(nc.ricci - lam[:, None, None] * nc.g).max(axis=(1, 2))
    misfit = float(np.max(resid / np.maximum(np.abs(lam), 1e-300)))
    return lam, misfit
