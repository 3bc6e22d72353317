"""Dense tensor algebra used throughout the package.

Tensors are plain ``numpy.ndarray`` objects of dtype float64.  A loading set
is a sequence of ``n`` matrices ``U_j`` of shape ``(I_j, R)``.

Linearization order is first-index-fastest (Fortran order) everywhere: the
mode-(n+1) unfolding of a stack ``[X_1, ..., X_N]`` has ``vectorize(X_k)`` as
its k-th row, and ``unfold(cp_out(U), n).T == khatri_rao_list(U[::-1])``.
Modes are 0-based.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

EPS_NORM = 1e-12
DTF_MAGIC = "DTF1"


class ShapeError(ValueError):
    """Raised when operand shapes are inconsistent."""


def as_tensor(data) -> np.ndarray:
    T = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(T)):
        raise ValueError("tensor contains non-finite entries")
    return T


def vectorize(T: np.ndarray) -> np.ndarray:
    """Entries of ``T`` with the first index varying fastest."""
    return np.ravel(np.asarray(T, dtype=np.float64), order="F")


def devectorize(v: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.size != int(np.prod(shape)):
        raise ShapeError(f"cannot fold {v.size} entries into shape {tuple(shape)}")
    return np.reshape(v, tuple(shape), order="F")


def _check_mode(ndim: int, mode: int) -> None:
    if not 0 <= mode < ndim:
        raise ShapeError(f"mode {mode} out of range for a {ndim}-mode tensor")


def unfold(T: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization, shape ``(I_mode, prod of the other dims)``.

    Remaining indices are linearized first-index-fastest, so that the
    last-mode unfolding of a stacked tensor has the vectorized slices as rows.
    """
    T = np.asarray(T, dtype=np.float64)
    _check_mode(T.ndim, mode)
    return np.reshape(np.moveaxis(T, mode, 0), (T.shape[mode], -1), order="F")


def refold(M: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(shape)
    _check_mode(len(shape), mode)
    moved = (shape[mode],) + shape[:mode] + shape[mode + 1:]
    M = np.asarray(M, dtype=np.float64)
    if M.size != int(np.prod(shape)):
        raise ShapeError(f"matrix of size {M.size} does not match shape {shape}")
    return np.moveaxis(np.reshape(M, moved, order="F"), 0, mode)


def mode_product(T: np.ndarray, M: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` product ``T x_mode M``; ``M`` has shape ``(J, I_mode)``."""
    T = np.asarray(T, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    _check_mode(T.ndim, mode)
    if M.ndim != 2 or M.shape[1] != T.shape[mode]:
        raise ShapeError(
            f"matrix with {M.shape[-1]} columns cannot act on mode {mode} of length {T.shape[mode]}"
        )
    out = np.tensordot(M, T, axes=([1], [mode]))
    return np.moveaxis(out, 0, mode)


def hadamard(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ShapeError(f"hadamard of shapes {A.shape} and {B.shape}")
    return A * B


def khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; the row index of ``B`` varies fastest.

    With first-index-fastest vectorization ``B`` therefore plays the role of
    the earlier tensor mode.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ShapeError(f"khatri_rao needs equal column counts, got {A.shape} and {B.shape}")
    return (A[:, None, :] * B[None, :, :]).reshape(A.shape[0] * B.shape[0], A.shape[1])


def khatri_rao_list(mats: Sequence[np.ndarray]) -> np.ndarray:
    """``mats[0] kr mats[1] kr ... kr mats[-1]`` (left-associated)."""
    out = np.asarray(mats[0], dtype=np.float64)
    for M in mats[1:]:
        out = khatri_rao(out, M)
    return out


def check_loadings(factors: Sequence[np.ndarray], shape: Sequence[int] | None = None) -> int:
    """Validate a loading set and return its rank."""
    if len(factors) == 0:
        raise ShapeError("empty loading set")
    R = factors[0].shape[1]
    for j, U in enumerate(factors):
        if U.ndim != 2 or U.shape[1] != R:
            raise ShapeError(f"factor {j} has shape {U.shape}, expected (*, {R})")
    if shape is not None:
        dims = tuple(U.shape[0] for U in factors)
        if tuple(shape) != dims:
            raise ShapeError(f"loadings span {dims}, data has leading shape {tuple(shape)}")
    return R


def cp_out(factors: Sequence[np.ndarray]) -> np.ndarray:
    """The CP-dictionary: tensor ``I_1 x ... x I_n x R`` whose r-th last-mode
    slice is the outer product of the r-th columns of all factors."""
    R = check_loadings(factors)
    shape = tuple(U.shape[0] for U in factors) + (R,)
    return devectorize(khatri_rao_list(factors[::-1]), shape)


def cp_eval(factors: Sequence[np.ndarray], C: np.ndarray) -> np.ndarray:
    """``cp_out(factors) x_{n+1} C.T`` for a code matrix ``C`` of shape (R, b)."""
    R = check_loadings(factors)
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != R:
        raise ShapeError(f"code matrix must have {R} rows, got shape {C.shape}")
    letters = "abcdefghijklmnopqrstuvw"
    n = len(factors)
    if n > len(letters):
        raise ShapeError("too many modes")
    idx = letters[:n]
    spec = ",".join(f"{c}z" for c in idx) + ",zy->" + idx + "y"
    return np.einsum(spec, *factors, C, optimize=True)


def gram_hadamard(factors: Sequence[np.ndarray], skip: int | None = None) -> np.ndarray:
    """Hadamard product of ``U_k.T @ U_k`` over all k (except ``skip``)."""
    R = check_loadings(factors)
    G = np.ones((R, R))
    for k, U in enumerate(factors):
        if k != skip:
            G *= U.T @ U
    return G


def contract_atoms(T: np.ndarray, factors: Sequence[np.ndarray], skip: int | None = None) -> np.ndarray:
    """Contract the leading modes of ``T`` against the atom columns.

    ``T`` has shape ``(I_1, ..., I_n, *rest)``.  With ``skip=None`` returns an
    ``(R, *rest)`` array whose ``[r, ...]`` entry is ``T[..., s]`` contracted
    with ``U_1[:, r], ..., U_n[:, r]``.  With ``skip=j`` mode j is left free
    and the result has shape ``(I_j, R, *rest)``.
    """
    n = len(factors)
    letters = "abcdefghijklmnopqrstuvw"
    idx = letters[:n]
    rest = "".join(chr(ord("A") + i) for i in range(T.ndim - n))
    operands, terms = [T], [idx + rest]
    for k, U in enumerate(factors):
        if k != skip:
            operands.append(U)
            terms.append(idx[k] + "z")
    out = ("z" if skip is None else idx[skip] + "z") + rest
    return np.einsum(",".join(terms) + "->" + out, *operands, optimize=True)


def mttkrp(X: np.ndarray, factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """``unfold(X, mode) @ khatri_rao_list(others reversed)`` without forming it."""
    return contract_atoms(X, factors, skip=mode)


def frob_norm(T: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(T))))


def rel_error(X: np.ndarray, Xhat: np.ndarray) -> float:
    X = np.asarray(X, dtype=np.float64)
    Xhat = np.asarray(Xhat, dtype=np.float64)
    if X.shape != Xhat.shape:
        raise ShapeError(f"rel_error of shapes {X.shape} and {Xhat.shape}")
    return frob_norm(X - Xhat) / max(frob_norm(X), EPS_NORM)


# -- DTF1 files --------------------------------------------------------------


class FormatError(ValueError):
    """Malformed tensor or image file."""


def write_dtf(path, T: np.ndarray) -> None:
    """Write ``T`` as a DTF1 file: ``DTF1 n I_1 ... I_n\\n`` + little-endian f8."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim == 0:
        T = T.reshape(1)
    header = " ".join([DTF_MAGIC, str(T.ndim)] + [str(d) for d in T.shape]) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(vectorize(T).astype("<f8").tobytes())


def read_dtf(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing DTF1 header line")
    try:
        tokens = raw[:nl].decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: header is not ASCII") from exc
    if not tokens or tokens[0] != DTF_MAGIC:
        raise FormatError(f"{path}: bad magic {tokens[:1]!r}")
    try:
        n = int(tokens[1])
        dims = [int(tok) for tok in tokens[2:]]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed header") from exc
    if n < 1 or len(dims) != n or any(d <= 0 for d in dims):
        raise FormatError(f"{path}: invalid dimensions {dims} for n={n}")
    count = int(np.prod(dims))
    payload = raw[nl + 1:]
    if len(payload) != 8 * count:
        raise FormatError(f"{path}: expected {8 * count} payload bytes, found {len(payload)}")
    v = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    # C order so loaded arrays behave like freshly computed ones in BLAS calls
    return np.ascontiguousarray(devectorize(v, dims))


__all__ = [
    "ShapeError",
    "FormatError",
    "as_tensor",
    "vectorize",
    "devectorize",
    "unfold",
    "refold",
    "mode_product",
    "hadamard",
    "khatri_rao",
    "khatri_rao_list",
    "check_loadings",
    "cp_out",
    "cp_eval",
    "gram_hadamard",
    "contract_atoms",
    "mttkrp",
    "frob_norm",
    "rel_error",
    "write_dtf",
    "read_dtf",
]
