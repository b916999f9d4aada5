"""Linear-algebra kernels.

Sparse storage and products are delegated to ``scipy.sparse`` (CSC layout);
orthonormalization, the small dense SVD, power iterations and subspace angles
are implemented here. Dense matrices and orthonormal bases are plain
``float64`` ndarrays; a basis is a ``(d, r)`` array with orthonormal columns.
"""
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from ._rng import GS_REFILL, POWER_INIT, SPECTRAL, make_rng

RANK_RTOL = 1e-10
GS_DROP_RTOL = 1e-12
JACOBI_TOL = 1e-12


class SparseMatrix:
    """Column-compressed ``d x n`` matrix.

    Row indices inside every column are strictly increasing, no explicit
    zeros are stored, and the underlying CSC arrays are never mutated after
    construction.

    Parameters
    ----------
    data : scipy sparse matrix, ndarray or SparseMatrix
        Anything ``scipy.sparse.csc_matrix`` accepts.
    shape : tuple of int, optional
        Needed only when ``data`` is a ``(values, indices, indptr)`` triple.
    """

    def __init__(self, data, shape=None):
        if isinstance(data, SparseMatrix):
            csc = data.csc.copy()
        else:
            csc = sp.csc_matrix(data, shape=shape, dtype=np.float64, copy=True)
        csc.sum_duplicates()
        csc.eliminate_zeros()
        csc.sort_indices()
        if not np.all(np.isfinite(csc.data)):
            raise ValueError("sparse matrix has non-finite entries")
        csc.data.flags.writeable = False
        csc.indices.flags.writeable = False
        csc.indptr.flags.writeable = False
        self.csc = csc

    @classmethod
    def from_columns(cls, n_rows, columns):
        """Build from per-column lists of ``(row_index, value)`` pairs."""
        rows, cols, vals = [], [], []
        for j, col in enumerate(columns):
            last = -1
            for i, v in col:
                if not 0 <= i < n_rows:
                    raise ValueError(f"row index {i} out of range in column {j}")
                if i <= last:
                    raise ValueError(f"row indices not strictly increasing in column {j}")
                last = i
                rows.append(i)
                cols.append(j)
                vals.append(float(v))
        coo = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, len(columns)))
        return cls(coo)

    @property
    def shape(self):
        return self.csc.shape

    @property
    def n_rows(self):
        return self.csc.shape[0]

    @property
    def n_cols(self):
        return self.csc.shape[1]

    @property
    def nnz(self):
        return int(self.csc.nnz)

    def column(self, j):
        """Return ``(row_indices, values)`` of column ``j``."""
        lo, hi = self.csc.indptr[j], self.csc.indptr[j + 1]
        return self.csc.indices[lo:hi], self.csc.data[lo:hi]

    def columns(self):
        for j in range(self.n_cols):
            rows, vals = self.column(j)
            yield list(zip(rows.tolist(), vals.tolist()))

    def column_mean(self, cols):
        """Average of the columns listed in ``cols`` as a dense vector."""
        cols = np.asarray(cols, dtype=np.intp)
        if cols.size == 0:
            raise ValueError("empty column subset")
        # touch only the stored entries of the listed columns
        indptr = self.csc.indptr
        starts, lengths = indptr[cols], indptr[cols + 1] - indptr[cols]
        offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        pos = np.repeat(starts, lengths) + offsets
        sums = np.bincount(self.csc.indices[pos], weights=self.csc.data[pos], minlength=self.n_rows)
        return sums / cols.size

    def column_norms_sq(self):
        sq = self.csc.multiply(self.csc)
        return np.asarray(sq.sum(axis=0)).ravel()

    def toarray(self):
        return self.csc.toarray()

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if other.shape != self.shape:
            return False
        a, b = self.csc, other.csc
        return (
            np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )

    __hash__ = None

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def as_sparse(A):
    return A if isinstance(A, SparseMatrix) else SparseMatrix(A)


def matvec(A, x):
    """Sparse product ``A @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.n_cols:
        raise ValueError(f"dimension mismatch: A has {A.n_cols} columns, x has length {x.shape[0]}")
    return A.csc @ x


def matvec_t(A, y):
    """Sparse product ``A.T @ y`` (one dot product per stored column)."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != A.n_rows:
        raise ValueError(f"dimension mismatch: A has {A.n_rows} rows, y has length {y.shape[0]}")
    return A.csc.T @ y


def _orthogonalize(v, Q, ncols):
    # two passes of modified Gram-Schmidt against Q[:, :ncols]
    for _ in range(2):
        for i in range(ncols):
            v = v - (Q[:, i] @ v) * Q[:, i]
    return v


def gram_schmidt(Z, rng=None):
    """Orthonormalize the columns of ``Z``.

    Modified Gram-Schmidt with one reorthogonalization pass. A column whose
    residual falls below ``1e-12`` times the largest input column norm is
    replaced by a random unit vector orthogonal to the other columns.

    Parameters
    ----------
    Z : ndarray, shape (d, r)
        Input columns, ``d >= r``.
    rng : numpy Generator, optional
        Source for replacement columns; a fixed stream is used if omitted.

    Returns
    -------
    Q : ndarray, shape (d, r)
        Orthonormal columns.
    deficient : bool
        True if at least one column had to be replaced.
    """
    Z = np.array(Z, dtype=np.float64, ndmin=2)
    d, r = Z.shape
    if r > d:
        raise ValueError(f"cannot orthonormalize {r} columns in dimension {d}")
    if rng is None:
        rng = make_rng(0, GS_REFILL)
    scale = max((np.linalg.norm(Z[:, j]) for j in range(r)), default=0.0)
    thresh = GS_DROP_RTOL * scale
    Q = np.zeros((d, r))
    deficient = False
    for j in range(r):
        v = _orthogonalize(Z[:, j].copy(), Q, j)
        nv = np.linalg.norm(v)
        if nv <= thresh or nv == 0.0:
            deficient = True
            while True:
                v = _orthogonalize(rng.standard_normal(d), Q, j)
                nv = np.linalg.norm(v)
                if nv > 1e-8:
                    break
        Q[:, j] = v / nv
    return Q, deficient


def default_power_iters(d):
    """``ceil(10 ln d)``, at least 1."""
    return max(1, math.ceil(10.0 * math.log(max(d, 2))))


def subspace_power(A, k, T, seed=0):
    """Approximate the top-``k`` left singular subspace of ``A``.

    Starts from a seeded Gaussian ``d x k`` matrix, orthonormalized, then
    repeats ``Z = A (A^T Q)`` followed by :func:`gram_schmidt` ``T`` times.
    If the starting matrix is rank deficient it is redrawn from the next
    seed.

    Returns
    -------
    ndarray, shape (d, k)
        Orthonormal basis ``Q_T``.
    """
    A = as_sparse(A)
    d, n = A.shape
    if not 1 <= k <= min(d, n):
        raise ValueError(f"k={k} out of range for a {d}x{n} matrix")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    attempt = 0
    while True:
        rng = make_rng(seed, POWER_INIT, attempt)
        Q, deficient = gram_schmidt(rng.standard_normal((d, k)), rng)
        if not deficient:
            break
        attempt += 1
    refill = make_rng(seed, GS_REFILL)
    csc, csr_t = A.csc, A.csc.T.tocsr()
    for _ in range(T):
        Z = csc @ (csr_t @ Q)
        Q, _ = gram_schmidt(Z, refill)
    return Q


def exact_left_subspace(A, k):
    """Top-``k`` left singular vectors from a dense SVD (small inputs only)."""
    A = as_sparse(A)
    U, _, _ = np.linalg.svd(A.toarray(), full_matrices=False)
    return U[:, :k].copy()


def _round_robin_pairs(q):
    # tournament schedule: q - 1 (q even) rounds of q / 2 disjoint pairs covering
    # every pair once; an odd q gets a dummy index q that is dropped
    slots = list(range(q + (q % 2)))
    half = len(slots) // 2
    rounds = []
    for _ in range(len(slots) - 1):
        pairs = [(min(a, b), max(a, b)) for a, b in zip(slots[:half], slots[::-1][:half]) if max(a, b) < q]
        rounds.append((np.array([p[0] for p in pairs], dtype=np.intp),
                       np.array([p[1] for p in pairs], dtype=np.intp)))
        slots = [slots[0], slots[-1]] + slots[1:-1]
    return rounds


def _jacobi_columns(G, tol=JACOBI_TOL, max_sweeps=100):
    """One-sided Jacobi: rotate columns of ``G`` until mutually orthogonal.

    Each sweep visits every column pair once in round-robin order, applying
    the disjoint rotations of one round together.

    Returns ``(W, V)`` with ``W = G @ V``, ``V`` orthogonal ``q x q`` and the
    columns of ``W`` pairwise orthogonal to relative tolerance ``tol``.
    """
    W = np.array(G, dtype=np.float64, ndmin=2)
    q = W.shape[1]
    V = np.eye(q)
    # columns below this squared norm are numerically zero; rotating them only
    # chases denormals
    negligible = (np.finfo(np.float64).eps * np.linalg.norm(W)) ** 2
    schedule = _round_robin_pairs(q)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(max_sweeps):
            rotated = False
            for I, J in schedule:
                if I.size == 0:
                    continue
                Wi, Wj = W[:, I], W[:, J]
                a = np.einsum("ij,ij->j", Wi, Wi)
                b = np.einsum("ij,ij->j", Wj, Wj)
                c = np.einsum("ij,ij->j", Wi, Wj)
                zeta = (b - a) / (2.0 * c)
                act = ((c != 0.0) & (np.minimum(a, b) > negligible)
                       & (np.abs(c) > tol * np.sqrt(a) * np.sqrt(b)) & np.isfinite(zeta))
                if not act.any():
                    continue
                rotated = True
                z = np.where(act, zeta, 1.0)
                t = np.where(act, np.copysign(1.0, z) / (np.abs(z) + np.hypot(1.0, z)), 0.0)
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                W[:, I] = cs * Wi - sn * Wj
                W[:, J] = sn * Wi + cs * Wj
                Vi, Vj = V[:, I], V[:, J]
                V[:, I] = cs * Vi - sn * Vj
                V[:, J] = sn * Vi + cs * Vj
            if not rotated:
                break
    return W, V


def small_svd(G):
    """SVD of a small dense matrix by one-sided Jacobi rotations.

    Parameters
    ----------
    G : array_like, shape (p, q)

    Returns
    -------
    s : ndarray, shape (min(p, q),)
        Singular values, non-increasing.
    U : ndarray, shape (p, min(p, q))
    Vt : ndarray, shape (min(p, q), q)
        ``G = U @ diag(s) @ Vt`` with orthonormal columns of ``U`` and rows
        of ``Vt``.
    """
    G = np.array(G, dtype=np.float64, ndmin=2)
    p, q = G.shape
    if p * q > 10**6:
        raise ValueError("small_svd is meant for matrices with at most 1e6 entries")
    if p < q:
        s, U, Vt = small_svd(G.T)
        return s, Vt.T.copy(), U.T.copy()
    W, V = _jacobi_columns(G)
    s = np.linalg.norm(W, axis=0)
    order = np.argsort(-s, kind="stable")
    s, W, V = s[order], W[:, order], V[:, order]
    U = np.zeros((p, q))
    live = s > 0
    U[:, live] = W[:, live] / s[live]
    if not live.all():
        # fill the left vectors of zero singular values with an orthonormal completion
        nlive = int(live.sum())
        filler = make_rng(0, GS_REFILL)
        for j in range(nlive, q):
            while True:
                v = _orthogonalize(filler.standard_normal(p), U, j)
                nv = np.linalg.norm(v)
                if nv > 1e-8:
                    break
            U[:, j] = v / nv
    return s, U, V.T.copy()


def _as_operator(B):
    if isinstance(B, SparseMatrix):
        return aslinearoperator(B.csc)
    if isinstance(B, LinearOperator):
        return B
    return aslinearoperator(B)


def spectral_norm(B, iters=200, seed=0):
    """Power-iteration estimate of the largest singular value of ``B``.

    ``B`` may be anything exposing ``matvec``/``rmatvec`` (a
    ``scipy.sparse.linalg.LinearOperator``), a sparse or dense matrix. The
    estimate is ``|B x|`` for the final unit iterate ``x`` and therefore
    never exceeds the true norm.

    Returns
    -------
    estimate : float
    rel_change : float
        Relative change between the last two estimates, a convergence
        indicator.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    op = _as_operator(B)
    n = op.shape[1]
    rng = make_rng(seed, SPECTRAL)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    y = np.asarray(op.matvec(x)).ravel()
    est = prev = float(np.linalg.norm(y))
    for _ in range(iters):
        if est == 0.0:
            return 0.0, 0.0
        z = np.asarray(op.rmatvec(y)).ravel()
        nz = np.linalg.norm(z)
        if nz == 0.0:
            break
        x = z / nz
        y = np.asarray(op.matvec(x)).ravel()
        prev, est = est, float(np.linalg.norm(y))
    return est, abs(est - prev) / est


def sin_theta(F, G):
    """Largest principal-angle sine from ``span(F)`` to ``span(G)``.

    Computed as the spectral norm of ``(I - G G^T) F``; this is symmetric
    when both bases have the same number of columns and equals 1 whenever
    ``F`` has more columns than ``G``.
    """
    F = np.array(F, dtype=np.float64, ndmin=2)
    G = np.array(G, dtype=np.float64, ndmin=2)
    if F.shape[0] != G.shape[0]:
        raise ValueError(f"ambient dimensions differ: {F.shape[0]} vs {G.shape[0]}")
    if F.shape[1] < 1 or G.shape[1] < 1:
        raise ValueError("both subspaces need at least one basis column")
    R = F - G @ (G.T @ F)
    s = small_svd(R)[0]
    return float(min(1.0, s[0]))


def null_space_within(V, C):
    """Orthonormal basis of ``{V z : C z = 0}``.

    Parameters
    ----------
    V : ndarray, shape (d, k)
        Orthonormal basis.
    C : ndarray, shape (r, k)
        Constraint matrix in ``V``-coordinates, ``r < k``. With
        ``C = At.T @ V`` the result is the part of ``span(V)`` orthogonal to
        the columns of ``At``.

    Returns
    -------
    ndarray, shape (d, k - rank(C))
        Rank is counted at threshold ``1e-10 * s_1(C)``.
    """
    V = np.array(V, dtype=np.float64, ndmin=2)
    C = np.array(C, dtype=np.float64, ndmin=2)
    r, k = C.shape
    if k != V.shape[1]:
        raise ValueError(f"C has {k} columns but V has {V.shape[1]}")
    if r >= k:
        raise ValueError(f"need fewer constraints than basis columns (r={r}, k={k})")
    if r == 0:
        return V.copy()
    # LAPACK here: this runs once per round and sits on the timed path
    _, s, Vt = np.linalg.svd(C, full_matrices=True)
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0
    return V @ Vt[rank:].T
