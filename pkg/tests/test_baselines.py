import numpy as np
import pytest

from ocpdl.baselines import als_sweep, cp_full, cp_objective, mu_sweep, refit_last_mode
from ocpdl.sparse_coding import CodingSettings
from ocpdl.tensor_core import ShapeError, cp_out, rel_error
from conftest import random_factors


def run(sweep, X, factors, n):
    objs = [cp_objective(X, factors)]
    for _ in range(n):
        factors = sweep(X, factors)
        objs.append(cp_objective(X, factors))
    return factors, objs


def test_cp_full_and_objective(rng):
    U = random_factors(rng, (3, 4, 2), 2)
    np.testing.assert_allclose(cp_full(U), cp_out(U).sum(axis=-1))
    X = rng.uniform(size=(3, 4, 2))
    assert cp_objective(X, U) == pytest.approx(float(np.sum((X - cp_full(U)) ** 2)), rel=1e-10)


@pytest.mark.parametrize("sweep", [als_sweep, mu_sweep])
def test_exact_data_stays_exact(rng, sweep):
    U = random_factors(rng, (3, 3, 3), 2, low=0.2)
    X = cp_full(U)
    new = sweep(X, U)
    assert cp_objective(X, new) == pytest.approx(0.0, abs=1e-10)


def test_mu_fixed_point(rng):
    U = random_factors(rng, (3, 4, 2), 2, low=0.2)
    for a, b in zip(U, mu_sweep(cp_full(U), U)):
        np.testing.assert_allclose(a, b, atol=1e-10)


@pytest.mark.parametrize("sweep", [als_sweep, mu_sweep])
def test_objective_non_increasing(rng, sweep):
    for _ in range(5):
        X = rng.uniform(size=(4, 5, 3))
        _, objs = run(sweep, X, random_factors(rng, X.shape, 3), 15)
        assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))


@pytest.mark.parametrize("sweep,sweeps,tol", [(als_sweep, 50, 1e-6), (mu_sweep, 500, 1e-4)])
def test_rank_one_recovery(rng, sweep, sweeps, tol):
    X = cp_full(random_factors(rng, (2, 2, 2), 1, low=0.5))
    U, _ = run(sweep, X, random_factors(rng, (2, 2, 2), 1, low=0.1), sweeps)
    assert rel_error(X, cp_full(U)) <= tol


def test_refit_recovers_last_factor(rng):
    U = random_factors(rng, (4, 5, 6), 3, low=0.1)
    X = cp_full(U)
    full = refit_last_mode(X, U[:2], settings=CodingSettings(tol=1e-15, max_iters=10**6))
    np.testing.assert_allclose(full[2], U[2], atol=1e-6)
    assert not refit_last_mode(np.zeros((4, 5, 6)), U[:2])[2].any()
    with pytest.raises(ShapeError):
        refit_last_mode(np.zeros((4, 5)), U[:2])
