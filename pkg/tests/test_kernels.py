import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from ocpdl import kernels

needs_compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="extension not built")


def coding_problem(rng, R=4, b=3):
    W = rng.uniform(size=(12, R))
    G = W.T @ W
    return G, W.T @ rng.uniform(size=(12, b)), 1.0 / (2.0 * np.trace(G))


@needs_compiled
@pytest.mark.parametrize("lam,cmax", [(0.0, np.inf), (0.3, np.inf), (0.1, 0.2)])
def test_pgd_code_backends_agree(rng, lam, cmax):
    for _ in range(10):
        G, P, eta = coding_problem(rng)
        C0 = np.zeros(P.shape)
        a, na = kernels.pgd_code(G, P, C0, lam, eta, cmax, 1e-10, 500)
        b, nb = kernels.pgd_code(G, P, C0, lam, eta, cmax, 1e-10, 500, backend="python")
        assert na == nb
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@needs_compiled
def test_cyclic_columns_backends_agree(rng):
    for _ in range(10):
        M = rng.uniform(size=(8, 3))
        A, B = M.T @ M, rng.standard_normal((5, 3))
        U0 = rng.uniform(size=(5, 3))
        a, na = kernels.cyclic_columns(U0, A, B, 1.5, 1e-12, 200)
        b, nb = kernels.cyclic_columns(U0, A, B, 1.5, 1e-12, 200, backend="python")
        assert na == nb
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@pytest.mark.parametrize("backend", [None, "python"])
def test_kernels_reject_non_finite(backend):
    G = np.array([[np.nan]])
    with pytest.raises(FloatingPointError):
        kernels.pgd_code(G, np.ones((1, 1)), np.zeros((1, 1)), 0.0, 0.5, np.inf, 1e-8, 10,
                         backend=backend)
    with pytest.raises(FloatingPointError):
        kernels.cyclic_columns(np.zeros((2, 1)), np.array([[np.inf]]), np.zeros((2, 1)),
                               1.0, 1e-8, 10, backend=backend)


@pytest.mark.parametrize("backend", [None, "python"])
def test_inputs_not_modified(rng, backend):
    G, P, eta = coding_problem(rng)
    C0 = rng.uniform(size=P.shape)
    saved = C0.copy()
    kernels.pgd_code(G, P, C0, 0.0, eta, np.inf, 1e-8, 50, backend=backend)
    np.testing.assert_array_equal(C0, saved)


def test_env_var_forces_fallback():
    env = dict(os.environ, OCPDL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import ocpdl; print(ocpdl.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
