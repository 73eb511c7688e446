import os
import subprocess
import sys

import numpy as np
import pytest

from eaw import _kernels as K
from eaw.algebra import GrassmannElement, center

BOTH = [
    ("grassmann_tables", K.grassmann_tables_numba, K.grassmann_tables_numpy),
    ("central_flags", K.central_flags_numba, K.central_flags_numpy),
]


@pytest.mark.parametrize("q", [1, 2, 3, 4, 6])
@pytest.mark.parametrize("name, fast, slow", BOTH)
def test_table_kernels_agree(name, fast, slow, q):
    a, b = fast(q), slow(q)
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_sign_table_matches_reference_products(q):
    sign, mask = K.grassmann_tables_numpy(q)
    for i in range(1 << q):
        for j in range(1 << q):
            p = GrassmannElement.monomial(i, q) * GrassmannElement.monomial(j, q)
            want = dict(p.terms).get(i | j, 0)
            assert sign[i, j] == want
            assert mask[i, j] == i | j


@pytest.mark.parametrize("q", [1, 2, 3, 4, 5])
def test_central_flags_match_centre(q):
    flags = K.central_flags(q)
    centre = {t[0][0] for el in center(q) for t in [el.terms]}
    assert {m for m in range(1 << q) if flags[m]} == centre


def test_dense_multiplication_agrees():
    rng = np.random.default_rng(3)
    sign, mask = K.grassmann_tables(6)
    for _ in range(10):
        x = rng.integers(-3, 4, 64).astype(float)
        y = rng.integers(-3, 4, 64).astype(float)
        assert np.array_equal(K.grassmann_mul_dense_numba(x, y, sign, mask),
                              K.grassmann_mul_dense_numpy(x, y, sign, mask))


def test_curvature_kernels_agree():
    rng = np.random.default_rng(5)
    n, p = 4, 16
    g = np.diag([1.0, -1.0, -1.0, -1.0]) + 0.05 * rng.standard_normal((p, n, n))
    g = 0.5 * (g + g.transpose(0, 2, 1))
    dg = rng.standard_normal((p, n, n, n))
    dg = 0.5 * (dg + dg.transpose(0, 1, 3, 2))
    ddg = rng.standard_normal((p, n, n, n, n))
    ddg = 0.5 * (ddg + ddg.transpose(0, 2, 1, 3, 4))
    ddg = 0.5 * (ddg + ddg.transpose(0, 1, 2, 4, 3))
    for a, b in zip(K.curvature_numba(g, dg, ddg), K.curvature_numpy(g, dg, ddg)):
        assert np.allclose(a, b, rtol=1e-11, atol=1e-11)


def test_curvature_kernel_on_flat_data_is_zero():
    p, n = 3, 4
    g = np.tile(np.diag([1.0, -1.0, -1.0, -1.0]), (p, 1, 1))
    out = K.curvature(g, np.zeros((p, n, n, n)), np.zeros((p, n, n, n, n)))
    assert all(np.all(o == 0) for o in out)


@pytest.mark.parametrize("flag, expected", [("1", "False"), ("", "True")])
def test_env_flag_selects_path(flag, expected):
    pytest.importorskip("numba")
    env = dict(os.environ, EAW_DISABLE_NUMBA=flag)
    code = ("from eaw import _kernels as K; "
            "print(K.NUMBA_ENABLED, K.curvature is K.curvature_numba)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == [expected, expected]
