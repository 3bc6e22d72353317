import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ocpdl.tensor_core import (
    FormatError, ShapeError, cp_eval, cp_out, devectorize, gram_hadamard, hadamard, khatri_rao,
    khatri_rao_list, mode_product, mttkrp, read_dtf, refold, rel_error, unfold, vectorize, write_dtf,
)
from conftest import random_factors

shapes = st.lists(st.integers(1, 4), min_size=1, max_size=4).map(tuple)
finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def naive_unfold(T, mode):
    """Index-by-index matricization with remaining indices first-fastest."""
    others = [k for k in range(T.ndim) if k != mode]
    cols = int(np.prod([T.shape[k] for k in others]))
    M = np.zeros((T.shape[mode], cols))
    for idx in itertools.product(*(range(d) for d in T.shape)):
        col, stride = 0, 1
        for k in others:
            col += idx[k] * stride
            stride *= T.shape[k]
        M[idx[mode], col] = T[idx]
    return M


def naive_khatri_rao(A, B):
    return np.stack([np.kron(A[:, r], B[:, r]) for r in range(A.shape[1])], axis=1)


def test_vectorize_first_index_fastest():
    np.testing.assert_array_equal(vectorize([[1, 2], [3, 4]]), [1, 3, 2, 4])
    assert not vectorize(np.zeros((2, 3, 4))).any()


def test_devectorize_rejects_wrong_size():
    with pytest.raises(ShapeError):
        devectorize(np.arange(5), (2, 3))


@given(hnp.arrays(np.float64, shapes, elements=finite))
def test_vectorize_round_trip(T):
    np.testing.assert_array_equal(devectorize(vectorize(T), T.shape), T)


def test_unfold_examples():
    np.testing.assert_array_equal(unfold(np.eye(2), 0), np.eye(2))
    X1, X2 = np.array([[1.0, 2], [3, 4]]), np.array([[5.0, 6], [7, 8]])
    stacked = np.stack([X1, X2], axis=-1)
    np.testing.assert_array_equal(unfold(stacked, 2), np.stack([vectorize(X1), vectorize(X2)]))


def test_unfold_matches_index_enumeration(rng):
    for _ in range(20):
        shape = tuple(rng.integers(1, 5, size=rng.integers(1, 5)))
        T = rng.standard_normal(shape)
        for mode in range(T.ndim):
            np.testing.assert_array_equal(unfold(T, mode), naive_unfold(T, mode))


@given(hnp.arrays(np.float64, shapes, elements=finite), st.data())
def test_refold_inverts_unfold(T, data):
    mode = data.draw(st.integers(0, T.ndim - 1))
    np.testing.assert_array_equal(refold(unfold(T, mode), mode, T.shape), T)


def test_bad_mode():
    with pytest.raises(ShapeError):
        unfold(np.zeros((2, 2)), 2)


def test_mode_product_diagonal_scaling():
    T = np.array([[1.0, 0], [0, 1]])[:, :, None]
    out = mode_product(T, np.diag([2.0, 3.0]), 0)
    np.testing.assert_array_equal(out[:, :, 0], [[2, 0], [0, 3]])


def test_mode_product_matches_unfolding(rng):
    for _ in range(20):
        T = rng.standard_normal((3, 4, 2))
        mode = int(rng.integers(0, 3))
        M = rng.standard_normal((5, T.shape[mode]))
        expected = refold(M @ unfold(T, mode), mode, T.shape[:mode] + (5,) + T.shape[mode + 1:])
        np.testing.assert_allclose(mode_product(T, M, mode), expected, atol=1e-12)


def test_mode_product_shape_error():
    with pytest.raises(ShapeError):
        mode_product(np.zeros((2, 3)), np.zeros((2, 2)), 1)


def test_hadamard_shape_error():
    with pytest.raises(ShapeError):
        hadamard(np.ones((2, 2)), np.ones((2, 3)))


def test_khatri_rao_examples():
    np.testing.assert_array_equal(khatri_rao(np.ones((1, 3)), np.ones((1, 3))), np.ones((1, 3)))
    # B's row index runs fastest: (a1 b1, a1 b2, a2 b1, a2 b2)
    np.testing.assert_array_equal(khatri_rao([[1.0], [2.0]], [[3.0], [4.0]])[:, 0], [3, 4, 6, 8])


def test_khatri_rao_matches_kron(rng):
    for _ in range(20):
        A, B = rng.standard_normal((3, 4)), rng.standard_normal((5, 4))
        np.testing.assert_allclose(khatri_rao(A, B), naive_khatri_rao(A, B), atol=1e-14)


def test_khatri_rao_column_mismatch():
    with pytest.raises(ShapeError):
        khatri_rao(np.ones((2, 2)), np.ones((2, 3)))


def test_cp_out_examples():
    ones = np.ones((2, 1))
    np.testing.assert_array_equal(cp_out([ones, ones]), np.ones((2, 2, 1)))
    out = cp_out([np.array([[1.0], [2.0]]), np.array([[3.0], [4.0]])])
    np.testing.assert_array_equal(out[:, :, 0], [[3, 4], [6, 8]])
    U = [np.array([[1.0, 0.0], [2.0, 0.0]]), np.array([[1.0, 0.0], [1.0, 0.0]])]
    assert not cp_out(U)[..., 1].any()


def test_cp_out_atoms_are_outer_products(rng):
    U = random_factors(rng, (3, 4, 5), 2)
    D = cp_out(U)
    for r in range(2):
        np.testing.assert_allclose(D[..., r], np.einsum("i,j,k->ijk", *(u[:, r] for u in U)))


def test_cp_eval_examples(rng):
    U = random_factors(rng, (3, 4), 3)
    np.testing.assert_allclose(cp_eval(U, np.eye(3)), cp_out(U), atol=1e-14)
    ones = np.ones((2, 1))
    np.testing.assert_array_equal(cp_eval([ones, ones], [[3.0]]), np.full((2, 2, 1), 3.0))
    with pytest.raises(ShapeError):
        cp_eval(U, np.ones((2, 2)))


def test_gram_hadamard_examples():
    ones = np.ones((2, 1))
    np.testing.assert_array_equal(gram_hadamard([ones, ones]), [[4.0]])
    np.testing.assert_array_equal(gram_hadamard([np.eye(3)[:, :2], np.eye(4)[:, :2]]), np.eye(2))


def test_mttkrp_matches_unfolding_times_khatri_rao(rng):
    for _ in range(20):
        shape = tuple(rng.integers(2, 5, size=3))
        X = rng.standard_normal(shape)
        U = random_factors(rng, shape, 3)
        for mode in range(3):
            others = [U[k] for k in range(3) if k != mode]
            expected = unfold(X, mode) @ khatri_rao_list(others[::-1])
            np.testing.assert_allclose(mttkrp(X, U, mode), expected, atol=1e-12)


def test_rel_error():
    X = np.ones((2, 2))
    assert rel_error(X, X) == 0.0
    assert rel_error(X, np.zeros((2, 2))) == pytest.approx(1.0)
    with pytest.raises(ShapeError):
        rel_error(X, np.ones(3))


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.float64, shapes, elements=st.floats(allow_nan=False, width=64)))
def test_dtf_round_trip_bit_exact(tmp_path_factory, T):
    path = tmp_path_factory.mktemp("dtf") / "t.dtf1"
    write_dtf(path, T)
    back = read_dtf(path)
    assert back.shape == T.shape
    assert back.tobytes() == T.tobytes()


def test_dtf_header_layout(tmp_path):
    path = tmp_path / "a.dtf1"
    write_dtf(path, np.array([[1.0, 2.0], [3.0, 4.0]]))
    raw = path.read_bytes()
    assert raw.startswith(b"DTF1 2 2 2\n")
    np.testing.assert_array_equal(np.frombuffer(raw[11:], "<f8"), [1, 3, 2, 4])


@pytest.mark.parametrize("payload", [
    b"XXXX 1 2\n" + b"\0" * 16,
    b"DTF1 1 0\n",
    b"DTF1 2 2\n" + b"\0" * 16,
    b"DTF1 1 3\n" + b"\0" * 16,
    b"no newline",
])
def test_dtf_rejects_malformed(tmp_path, payload):
    path = tmp_path / "bad.dtf1"
    path.write_bytes(payload)
    with pytest.raises(FormatError):
        read_dtf(path)
