"""Data sources: Markov-modulated tensor streams, subsampled synthetic CP
tensors, image patches, and the PPM / Markov-spec file readers.

All randomness goes through ``numpy.random.Generator`` objects (PCG64) built
from explicit seeds; ``np.random.SeedSequence.spawn`` is used to split them.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .tensor_core import FormatError, ShapeError, cp_out, read_dtf

log = logging.getLogger(__name__)


class ReducibleChainError(ValueError):
    pass


# -- Markov chains -----------------------------------------------------------


@dataclass
class MarkovChainSpec:
    transition: np.ndarray
    observations: list = field(default_factory=list)
    initial_state: int | np.ndarray = 0

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("transition matrix must be row-stochastic")
        self.transition = P
        if self.observations:
            if len(self.observations) != P.shape[0]:
                raise ValueError("need one observation tensor per state")
            self.observations = [np.asarray(o, dtype=np.float64) for o in self.observations]
            shapes = {o.shape for o in self.observations}
            if len(shapes) != 1:
                raise ValueError(f"observation tensors have differing shapes {shapes}")

    @property
    def k(self) -> int:
        return self.transition.shape[0]


def markov_next(spec: MarkovChainSpec, state: int, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of the next state from row ``state`` using one uniform."""
    if not 0 <= state < spec.k:
        raise IndexError(f"state {state} out of range for {spec.k} states")
    cdf = np.cumsum(spec.transition[state])
    u = rng.random()
    nxt = int(np.searchsorted(cdf, u, side="right"))
    return min(nxt, spec.k - 1)


def _reachable(adj: np.ndarray, start: int) -> set:
    seen = {start}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(adj[i]):
            if j not in seen:
                seen.add(int(j))
                queue.append(int(j))
    return seen


def is_irreducible(P: np.ndarray) -> bool:
    adj = np.asarray(P) > 0
    k = adj.shape[0]
    return len(_reachable(adj, 0)) == k and len(_reachable(adj.T, 0)) == k


def period(P: np.ndarray) -> int:
    """Period of an irreducible chain (gcd of BFS level differences)."""
    adj = np.asarray(P) > 0
    level = {0: 0}
    queue = deque([0])
    g = 0
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(adj[i]):
            j = int(j)
            if j not in level:
                level[j] = level[i] + 1
                queue.append(j)
            else:
                g = np.gcd(g, level[i] + 1 - level[j])
    return int(g) if g else 0


def stationary_dist(spec: MarkovChainSpec | np.ndarray, tol: float = 1e-12,
                    max_iters: int = 1_000_000) -> np.ndarray:
    """Stationary distribution by power iteration on the lazy chain ``(P + I) / 2``.

    The lazy chain shares the stationary distribution of ``P`` and is
    aperiodic, so the iteration converges for periodic chains too.
    """
    P = spec.transition if isinstance(spec, MarkovChainSpec) else np.asarray(spec, dtype=np.float64)
    if not is_irreducible(P):
        raise ReducibleChainError("transition matrix is reducible")
    k = P.shape[0]
    lazy = 0.5 * (P + np.eye(k))
    pi = np.full(k, 1.0 / k)
    for _ in range(max_iters):
        nxt = pi @ lazy
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() <= tol:
            pi = nxt
            break
        pi = nxt
    # polish: a few plain steps keep ||pi P - pi||_1 at roundoff level
    for _ in range(3):
        pi = pi @ lazy
        pi /= pi.sum()
    return pi


def _initial_state(spec: MarkovChainSpec, rng) -> int:
    init = spec.initial_state
    if np.ndim(init) == 0:
        return int(init)
    p = np.asarray(init, dtype=np.float64)
    return int(min(np.searchsorted(np.cumsum(p), rng.random(), side="right"), spec.k - 1))


def markov_states(spec: MarkovChainSpec, length: int, rng) -> np.ndarray:
    """State path ``Y_1, ..., Y_length`` (the first is the initial state)."""
    out = np.empty(length, dtype=np.int64)
    if length == 0:
        return out
    s = _initial_state(spec, rng)
    out[0] = s
    for i in range(1, length):
        s = markov_next(spec, s, rng)
        out[i] = s
    return out


def markov_tensor_stream(spec: MarkovChainSpec, length: int, b: int = 1,
                         seed: int | np.random.Generator = 0) -> Iterator[np.ndarray]:
    """Yield ``length`` minibatches, each stacking ``b`` consecutive observations."""
    if b < 1:
        raise ValueError("b must be at least 1")
    if not spec.observations:
        raise ValueError("spec has no observation tensors")
    if not is_irreducible(spec.transition):
        log.warning("transition matrix is reducible")
    elif period(spec.transition) != 1:
        log.warning("Markov chain is periodic; aperiodicity assumption violated")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    state = _initial_state(spec, rng)
    obs = spec.observations
    for _ in range(length):
        slices = []
        for _ in range(b):
            slices.append(obs[state])
            state = markov_next(spec, state, rng)
        yield np.stack(slices, axis=-1)


def cp_markov_spec(shape: Sequence[int], rank: int, k: int, seed: int = 0) -> MarkovChainSpec:
    """Chain on ``k`` states with a dense random transition matrix whose
    observations are nonnegative combinations of one fixed rank-``rank`` CP
    dictionary with uniform[0, 1] loadings."""
    rng = np.random.default_rng(seed)
    loadings = [rng.uniform(0.0, 1.0, size=(d, rank)) for d in shape]
    D = cp_out(loadings)
    obs = [np.tensordot(D, rng.uniform(0.0, 1.0, size=rank), axes=([-1], [0])) for _ in range(k)]
    P = rng.uniform(0.0, 1.0, size=(k, k))
    P /= P.sum(axis=1, keepdims=True)
    return MarkovChainSpec(P, obs)


def read_markov_spec(path) -> MarkovChainSpec:
    """Plain-text spec: ``k``, then k rows of P, then k DTF1 paths (relative
    paths resolve against the spec file's directory)."""
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        k = int(lines[0])
        P = np.array([[float(x) for x in lines[1 + i].split()] for i in range(k)])
        files = lines[1 + k: 1 + 2 * k]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed Markov spec") from exc
    if P.shape != (k, k) or len(files) != k:
        raise FormatError(f"{path}: expected {k}x{k} matrix and {k} observation files")
    obs = [read_dtf(f if Path(f).is_absolute() else path.parent / f) for f in files]
    return MarkovChainSpec(P, obs)


# -- synthetic CP tensors ----------------------------------------------------


@dataclass
class SyntheticCPSpec:
    true_loadings: list
    subsample: int
    seed: int = 0

    @property
    def full_last_mode(self) -> int:
        return self.true_loadings[-1].shape[0]

    def __post_init__(self):
        if self.subsample > self.full_last_mode:
            raise ValueError(f"subsample {self.subsample} exceeds last-mode length {self.full_last_mode}")

    @classmethod
    def random(cls, shape: Sequence[int], rank: int, subsample: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        loadings = [rng.uniform(0.0, 1.0, size=(d, rank)) for d in shape]
        return cls(loadings, subsample, seed)


def synthetic_full(spec: SyntheticCPSpec) -> np.ndarray:
    return cp_out(spec.true_loadings).sum(axis=-1)


def synthetic_stream(spec: SyntheticCPSpec, T: int, seed: int | None = None):
    """Full tensor and a generator of ``T`` last-mode subsampled batches.

    Each batch picks ``subsample`` distinct last-mode coordinates uniformly at
    random; batches are drawn independently of each other.
    """
    X_full = synthetic_full(spec)
    N = X_full.shape[-1]
    m = spec.subsample
    if m > N:
        raise ValueError(f"subsample {m} exceeds last-mode length {N}")
    rng = np.random.default_rng(spec.seed if seed is None else seed)

    def gen():
        for _ in range(T):
            idx = rng.choice(N, size=m, replace=False)
            yield X_full[..., idx]

    return X_full, gen()


def subsample_stream(X_full: np.ndarray, m: int, T: int, seed: int = 0):
    """Same sampling as :func:`synthetic_stream` for an arbitrary tensor."""
    N = X_full.shape[-1]
    if m > N:
        raise ValueError(f"subsample {m} exceeds last-mode length {N}")
    rng = np.random.default_rng(seed)
    for _ in range(T):
        yield X_full[..., rng.choice(N, size=m, replace=False)]


# -- images ------------------------------------------------------------------


def _ppm_tokens(raw: bytes, count: int):
    """First ``count`` whitespace-separated header tokens and the payload offset."""
    tokens, i = [], 0
    while len(tokens) < count:
        while i < len(raw) and raw[i:i + 1].isspace():
            i += 1
        if i < len(raw) and raw[i:i + 1] == b"#":
            while i < len(raw) and raw[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(raw) and not raw[j:j + 1].isspace():
            j += 1
        if j == i:
            raise FormatError("truncated PPM header")
        tokens.append(raw[i:j])
        i = j
    # exactly one whitespace byte separates the header from the raster
    return tokens, i + 1


def ppm_read(path) -> np.ndarray:
    """Binary P6 image with maxval 255 as an ``H x W x 3`` tensor in [0, 1]."""
    raw = Path(path).read_bytes()
    tokens, offset = _ppm_tokens(raw, 4)
    if tokens[0] != b"P6":
        raise FormatError(f"{path}: not a binary PPM (magic {tokens[0]!r})")
    try:
        W, H, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PPM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: maxval {maxval} unsupported (need 255)")
    if W <= 0 or H <= 0:
        raise FormatError(f"{path}: invalid size {W}x{H}")
    payload = raw[offset:offset + 3 * W * H]
    if len(payload) != 3 * W * H:
        raise FormatError(f"{path}: truncated raster")
    pix = np.frombuffer(payload, dtype=np.uint8).reshape(H, W, 3)
    return pix.astype(np.float64) / 255.0


def ppm_write(path, image: np.ndarray) -> None:
    """Write an ``H x W x 3`` array in [0, 1] as P6; values are rounded to 1/255."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"expected H x W x 3 image, got {img.shape}")
    H, W, _ = img.shape
    pix = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{W} {H}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def patch_corners(image_shape, p: int, count: int, rng) -> np.ndarray:
    H, W = image_shape[:2]
    if p > min(H, W) or p < 1:
        raise ShapeError(f"patch size {p} does not fit a {H}x{W} image")
    rows = rng.integers(0, H - p + 1, size=count)
    cols = rng.integers(0, W - p + 1, size=count)
    return np.stack([rows, cols], axis=1)


def patch_stream(image: np.ndarray, p: int, count: int, b: int,
                 seed: int | np.random.Generator = 0) -> Iterator[np.ndarray]:
    """Minibatches ``p x p x 3 x b`` of uniformly placed (possibly overlapping)
    patches; ``count`` patches in total, the last batch may be short."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    image = np.asarray(image, dtype=np.float64)
    corners = patch_corners(image.shape, p, count, rng)
    for start in range(0, count, b):
        chunk = corners[start:start + b]
        yield np.stack([image[r:r + p, c:c + p, :] for r, c in chunk], axis=-1)
