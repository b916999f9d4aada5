"""Learning the vertices of a latent simplex by subset smoothing.

The data polytope is replaced by the convex hull of all averages of
``m``-column subsets. Linear optimization over that hull needs only one
``A.T @ u`` product and a selection of the ``m`` largest (or smallest) dot
products, so each of the ``k`` rounds below costs ``O(nnz(A))``.
"""
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._rng import DIRECTION, make_rng
from .linalg import (
    as_sparse,
    default_power_iters,
    exact_left_subspace,
    matvec_t,
    null_space_within,
    subspace_power,
)


class DegenerateSubspaceError(RuntimeError):
    """The search subspace collapsed before all vertices were found."""

    def __init__(self, round_index, message=None):
        self.round_index = round_index
        super().__init__(
            message
            or f"search subspace is empty at round {round_index}: the vertex estimates found so far "
            "already span the top singular subspace (assumptions likely violated)"
        )


@dataclass(frozen=True)
class LlsConfig:
    k: int
    delta: float
    power_iters: int | None = None
    seed: int = 0
    use_exact_svd: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0 < self.delta <= 1.0 / self.k + 1e-12:
            raise ValueError(f"delta must lie in (0, 1/k] = (0, {1.0 / self.k:.6g}], got {self.delta}")
        if self.power_iters is not None and self.power_iters < 1:
            raise ValueError("power_iters must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def subset_size(self, n):
        m = subset_size(self.delta, n)
        if m < 1:
            raise ValueError(f"floor(delta * n) = 0 for delta={self.delta}, n={n}")
        return m

    def iterations(self, d):
        return self.power_iters if self.power_iters is not None else default_power_iters(d)


def subset_size(delta, n):
    """``floor(delta * n)``, robust to ``delta * n`` landing just below an integer."""
    return int(math.floor(delta * n + 1e-9))


@dataclass
class LlsResult:
    subsets: list
    vertex_estimates: np.ndarray
    directions: np.ndarray
    opt_values: np.ndarray
    seed: int
    timings: dict = field(default_factory=dict)
    repeated_subsets: list = field(default_factory=list)

    @property
    def k(self):
        return len(self.subsets)


def _extreme_indices(z, m, largest):
    # m extreme entries of z; ties at the cut go to the smaller index
    n = z.size
    if largest:
        cut = np.partition(z, n - m)[n - m]
        strict = np.flatnonzero(z > cut)
    else:
        cut = np.partition(z, m - 1)[m - 1]
        strict = np.flatnonzero(z < cut)
    ties = np.flatnonzero(z == cut)[: m - strict.size]
    return np.sort(np.concatenate([strict, ties]))


def select_extreme_subset(z, m):
    """Size-``m`` subset maximizing ``|mean(z[S])|``.

    Returns ``(subset, signed_mean)``. The top-``m`` set wins exact ties in
    absolute mean.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    if not 1 <= m <= n:
        raise ValueError(f"subset size m={m} out of range [1, {n}]")
    top = _extreme_indices(z, m, largest=True)
    bottom = _extreme_indices(z, m, largest=False)
    top_val = math.fsum(z[top]) / m
    bottom_val = math.fsum(z[bottom]) / m
    if abs(top_val) >= abs(bottom_val):
        return top, top_val
    return bottom, bottom_val


def subset_smooth_argmax(A, u, m):
    """Maximize ``|u . A_S|`` over column subsets ``S`` of size ``m``.

    ``A_S`` is the average of the columns in ``S``. One pass computes every
    ``u . A_j``; the optimum is either the ``m`` largest or the ``m``
    smallest of them.

    Returns
    -------
    subset : ndarray of int
        Sorted column indices.
    value : float
        Signed optimum ``u . A_S``.
    """
    A = as_sparse(A)
    u = np.asarray(u, dtype=np.float64)
    if not 1 <= m <= A.n_cols:
        raise ValueError(f"subset size m={m} out of range [1, {A.n_cols}]")
    if not np.any(u):
        raise ValueError("direction vector is zero")
    return select_extreme_subset(matvec_t(A, u), m)


def random_direction(U, seed, stream=0):
    """Uniformly random unit vector in ``span(U)`` (``U`` orthonormal)."""
    U = np.array(U, dtype=np.float64, ndmin=2)
    p = U.shape[1]
    if p < 1:
        raise ValueError("cannot draw a direction from a zero-dimensional subspace")
    attempt = 0
    while True:
        g = make_rng(seed, DIRECTION, stream, attempt).standard_normal(p)
        u = U @ g
        nu = np.linalg.norm(u)
        if nu > 1e-150:
            return u / nu
        attempt += 1


def lls(A, cfg):
    """Recover ``k`` vertex estimates of the latent simplex behind ``A``.

    Parameters
    ----------
    A : SparseMatrix or array_like, shape (d, n)
    cfg : LlsConfig

    Returns
    -------
    LlsResult
        ``vertex_estimates[:, r]`` is the average of ``A`` over
        ``subsets[r]``; ``directions[:, r]`` is the unit direction used in
        round ``r``, orthogonal to all earlier estimates.

    Raises
    ------
    DegenerateSubspaceError
        If no direction is left before round ``k``.
    """
    A = as_sparse(A)
    d, n = A.shape
    k = cfg.k
    if k > min(d, n):
        raise ValueError(f"k={k} exceeds min(d, n) = {min(d, n)}")
    m = cfg.subset_size(n)

    t0 = time.perf_counter()
    if cfg.use_exact_svd:
        V = exact_left_subspace(A, k)
    else:
        V = subspace_power(A, k, cfg.iterations(d), cfg.seed)
    t1 = time.perf_counter()

    estimates = np.zeros((d, k))
    directions = np.zeros((d, k))
    values = np.zeros(k)
    subsets = []
    repeats = []
    for r in range(k):
        U = V if r == 0 else null_space_within(V, estimates[:, :r].T @ V)
        if U.shape[1] == 0:
            raise DegenerateSubspaceError(r)
        u = random_direction(U, cfg.seed, r)
        subset, value = subset_smooth_argmax(A, u, m)
        for t, earlier in enumerate(subsets):
            if np.array_equal(earlier, subset):
                repeats.append((t, r))
        subsets.append(subset)
        estimates[:, r] = A.column_mean(subset)
        directions[:, r] = u
        values[r] = value
    t2 = time.perf_counter()

    return LlsResult(
        subsets=subsets,
        vertex_estimates=estimates,
        directions=directions,
        opt_values=values,
        seed=cfg.seed,
        timings={"svd_seconds": t1 - t0, "rounds_seconds": t2 - t1},
        repeated_subsets=repeats,
    )
