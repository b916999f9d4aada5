"""Measuring the model assumptions and scoring recovered vertices.

Everything here needs ground truth (``P``, ``M``) and is meant for synthetic
experiments: the algorithm itself never looks at these quantities.
"""
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator

from ._rng import HAUSDORFF, KMEANS, make_rng
from .linalg import RANK_RTOL, as_sparse, small_svd, spectral_norm, subspace_power
from .simplex import _extreme_indices, subset_size, subset_smooth_argmax

FW_MAX_ITERS = 10_000
FW_RTOL = 1e-10
BRUTE_FORCE_MAX_K = 8
ROUNDOFF_ATOL = 1e-9


def measure_alpha(M):
    """Well-separatedness of the vertex matrix ``M`` (d x k).

    For each column, the norm of its component orthogonal to the span of
    the other columns, divided by the largest column norm; the minimum over
    columns is returned.
    """
    M = np.array(M, dtype=np.float64, ndmin=2)
    d, k = M.shape
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms == 0):
        raise ValueError(f"M has a zero column (index {int(np.flatnonzero(norms == 0)[0])})")
    if k == 1:
        return 1.0
    scale = norms.max()
    residuals = np.empty(k)
    for ell in range(k):
        others = np.delete(M, ell, axis=1)
        s, U, _ = small_svd(others)
        rank = int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0
        Ur = U[:, :rank]
        x = M[:, ell]
        res = np.linalg.norm(x - Ur @ (Ur.T @ x))
        residuals[ell] = 0.0 if res <= RANK_RTOL * scale else res
    return float(min(1.0, residuals.min() / scale))


PERTURBATION_BLOCK = 2048


def perturbation_operator(A, P, block=PERTURBATION_BLOCK):
    """``A - P`` as a linear operator, formed one column block at a time.

    Differencing entries before multiplying keeps the product exact when
    ``A`` and ``P`` agree, and memory stays at ``d * block``.
    """
    A = as_sparse(A)
    P = np.asarray(P, dtype=np.float64)
    if P.shape != A.shape:
        raise ValueError(f"shape mismatch: A is {A.shape}, P is {P.shape}")
    csc = A.csc
    d, n = A.shape
    bounds = [(lo, min(lo + block, n)) for lo in range(0, n, block)]

    def diff(lo, hi):
        return csc[:, lo:hi].toarray() - P[:, lo:hi]

    def mv(x):
        x = np.ravel(x)
        y = np.zeros(d)
        for lo, hi in bounds:
            y += diff(lo, hi) @ x[lo:hi]
        return y

    def rmv(y):
        y = np.ravel(y)
        return np.concatenate([diff(lo, hi).T @ y for lo, hi in bounds]) if bounds else np.zeros(0)

    return LinearOperator(A.shape, matvec=mv, rmatvec=rmv, dtype=np.float64)


def measure_sigma(A, P, iters=200, seed=0, return_change=False):
    """Noise scale ``||A - P|| / sqrt(n)`` by power iteration (an underestimate)."""
    op = perturbation_operator(A, P)
    est, change = spectral_norm(op, iters=iters, seed=seed)
    sigma = est / math.sqrt(op.shape[1])
    return (sigma, change) if return_change else sigma


@dataclass
class Proximity:
    counts: list
    passed: bool
    delta_realized: float
    radius: float


def _vertex_distances(P, M):
    # (k, n) matrix of |P_j - M_l|, computed from explicit differences
    return np.stack([np.linalg.norm(P - M[:, [ell]], axis=0) for ell in range(M.shape[1])])


def check_proximity(P, M, sigma, delta):
    """Count latent points within ``4 sigma / sqrt(delta)`` of each vertex.

    ``delta_realized`` is the largest value on the grid ``delta, delta/2,
    delta/4, ...`` for which every vertex has at least ``floor(delta' n)``
    latent points within ``4 sigma / sqrt(delta')``; 0 if none qualifies.
    """
    P = np.asarray(P, dtype=np.float64)
    M = np.array(M, dtype=np.float64, ndmin=2)
    if P.shape[0] != M.shape[0]:
        raise ValueError("P and M live in different dimensions")
    n = P.shape[1]
    dist = _vertex_distances(P, M)

    def counts_at(dl):
        radius = 4.0 * sigma / math.sqrt(dl)
        return (dist <= radius).sum(axis=1), radius

    counts, radius = counts_at(delta)
    passed = bool(np.all(counts >= subset_size(delta, n)))
    realized = 0.0
    dl = delta
    while subset_size(dl, n) >= 1:
        c, _ = counts_at(dl)
        if np.all(c >= subset_size(dl, n)):
            realized = dl
            break
        dl /= 2.0
    return Proximity(counts=counts.tolist(), passed=passed, delta_realized=realized, radius=radius)


def _simplex_ls_polish(G, b, support):
    # least squares on the affine hull of the support vertices
    s = np.flatnonzero(support)
    ns = s.size
    K = np.zeros((ns + 1, ns + 1))
    K[:ns, :ns] = G[np.ix_(s, s)]
    K[:ns, ns] = 1.0
    K[ns, :ns] = 1.0
    rhs = np.concatenate([b[s], [1.0]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    w = np.zeros(G.shape[0])
    w[s] = sol[:ns]
    return w


def dist_to_simplex(x, M):
    """Euclidean distance from ``x`` to the convex hull of the columns of ``M``.

    Frank-Wolfe with away steps and exact line search on
    ``0.5 |x - M w|^2`` over the unit simplex, stopped once the duality gap
    drops below ``1e-10 (1 + |x|)``; a final least-squares solve on the
    active face removes the residual sublinear tail when it stays feasible.

    Returns
    -------
    distance : float
    weights : ndarray, shape (k,)
        Non-negative, summing to 1.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    M = np.array(M, dtype=np.float64, ndmin=2)
    if M.shape[0] != x.size:
        raise ValueError(f"x has dimension {x.size}, M has {M.shape[0]} rows")
    k = M.shape[1]
    G = M.T @ M
    b = M.T @ x
    tol = FW_RTOL * (1.0 + np.linalg.norm(x))

    w = np.zeros(k)
    w[int(np.argmin(np.diag(G) - 2.0 * b))] = 1.0
    for _ in range(FW_MAX_ITERS):
        grad = G @ w - b
        gw = grad @ w
        s = int(np.argmin(grad))
        fw_gap = gw - grad[s]
        if fw_gap < tol:
            break
        active = np.flatnonzero(w > 0)
        v = int(active[np.argmax(grad[active])])
        away_gap = grad[v] - gw
        if fw_gap >= away_gap:
            direction = -w.copy()
            direction[s] += 1.0
            gamma_max = 1.0
        else:
            direction = w.copy()
            direction[v] -= 1.0
            gamma_max = w[v] / (1.0 - w[v])
        curv = direction @ G @ direction
        slope = -(grad @ direction)
        gamma = gamma_max if curv <= 0 else min(gamma_max, slope / curv)
        w = w + gamma * direction
        if fw_gap < away_gap and gamma == gamma_max:
            w[v] = 0.0
        w[w < 0] = 0.0
        w /= w.sum()

    def residual(weights):
        return float(np.linalg.norm(x - M @ weights))

    best = residual(w)
    polished = _simplex_ls_polish(G, b, w > 0)
    if np.all(polished >= 0) and polished.sum() > 0:
        polished /= polished.sum()
        r = residual(polished)
        if r <= best:
            w, best = polished, r
    return best, w


def hausdorff_estimate(A, M, delta, n_dirs=32, seed=0):
    """Estimate both directed distances between ``CH(M)`` and the smoothed hull.

    Returns
    -------
    dist_K_to_Kprime : float
        Upper estimate: for each vertex, the best of two candidate subset
        averages (the ``m`` columns nearest to it, and the top-``m`` columns
        along its direction away from the vertex centroid); worst vertex.
    dist_Kprime_to_K_lb : float
        Lower bound: the largest distance to ``CH(M)`` over the subset
        averages that optimize ``n_dirs`` random directions, each of which is
        a vertex of the smoothed hull.
    """
    A = as_sparse(A)
    M = np.array(M, dtype=np.float64, ndmin=2)
    d, n = A.shape
    k = M.shape[1]
    m = subset_size(delta, n)
    if m < 1:
        raise ValueError(f"floor(delta * n) = 0 for delta={delta}, n={n}")
    col_sq = A.column_norms_sq()
    centroid = M.mean(axis=1)
    to_k = 0.0
    for ell in range(k):
        vertex = M[:, ell]
        sq = col_sq - 2.0 * (A.csc.T @ vertex) + vertex @ vertex
        candidates = [_extreme_indices(sq, m, largest=False)]
        outward = vertex - centroid
        if np.any(outward):
            candidates.append(_extreme_indices(A.csc.T @ outward, m, largest=True))
        best = min(np.linalg.norm(vertex - A.column_mean(S)) for S in candidates)
        to_k = max(to_k, float(best))

    rng = make_rng(seed, HAUSDORFF)
    from_k = 0.0
    for _ in range(n_dirs):
        u = rng.standard_normal(d)
        S, _ = subset_smooth_argmax(A, u, m)
        from_k = max(from_k, dist_to_simplex(A.column_mean(S), M)[0])
    return to_k, from_k


@dataclass
class Matching:
    permutation: list
    max_err: float
    errs: list
    heuristic: bool


def match_vertices(estimates, M):
    """Pair estimate columns with true vertices, minimizing the worst error.

    ``estimates[:, permutation[l]]`` is matched to ``M[:, l]``. Exhaustive
    for ``k <= 8``; greedy by increasing pairwise distance beyond that.
    """
    E = np.array(estimates, dtype=np.float64, ndmin=2)
    M = np.array(M, dtype=np.float64, ndmin=2)
    if E.shape != M.shape:
        raise ValueError(f"shape mismatch: estimates {E.shape}, M {M.shape}")
    k = M.shape[1]
    D = np.linalg.norm(E[:, :, None] - M[:, None, :], axis=0)  # D[i, l] = |E_i - M_l|
    if k <= BRUTE_FORCE_MAX_K:
        perms = np.array(list(itertools.permutations(range(k))), dtype=np.intp)
        worst = D[perms, np.arange(k)].max(axis=1)
        perm = perms[int(np.argmin(worst))]
        heuristic = False
    else:
        perm = np.full(k, -1)
        used = np.zeros(k, dtype=bool)
        for flat in np.argsort(D, axis=None, kind="stable"):
            i, ell = divmod(int(flat), k)
            if perm[ell] < 0 and not used[i]:
                perm[ell] = i
                used[i] = True
        heuristic = True
    errs = D[perm, np.arange(k)]
    return Matching(permutation=perm.tolist(), max_err=float(errs.max()), errs=errs.tolist(),
                    heuristic=heuristic)


def lloyd_kmeans(X, k, seed=0, max_iter=300):
    """Plain Lloyd iterations with k-means++ seeding; points are columns of ``X``.

    Returns ``(centers, labels)`` with centers as a ``d x k`` array.
    """
    X = np.array(X, dtype=np.float64, ndmin=2)
    d, n = X.shape
    rng = make_rng(seed, KMEANS)
    centers = np.empty((d, k))
    centers[:, 0] = X[:, rng.integers(n)]
    closest = np.sum((X - centers[:, [0]]) ** 2, axis=0)
    for c in range(1, k):
        total = closest.sum()
        idx = rng.integers(n) if total == 0 else rng.choice(n, p=closest / total)
        centers[:, c] = X[:, idx]
        closest = np.minimum(closest, np.sum((X - centers[:, [c]]) ** 2, axis=0))
    labels = None
    for _ in range(max_iter):
        sq = ((X[:, None, :] - centers[:, :, None]) ** 2).sum(axis=0)
        new = np.argmin(sq, axis=0)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = labels == c
            if members.any():
                centers[:, c] = X[:, members].mean(axis=1)
    return centers, labels


@dataclass
class DiagnosticsReport:
    k: int
    n: int
    d: int
    delta: float
    alpha: float
    sigma: float
    sigma_change: float
    noise_radius: float
    proximity_counts: list
    delta_realized: float
    spectral_ratio: float
    spectral_ratio_free: float
    s_k_M: float
    s_k_P: float
    s_k_P_over_sigma_sqrt_n: float
    hausdorff_K_to_Kprime: float
    hausdorff_Kprime_to_K_lb: float
    hausdorff_bound: float
    bound_150: float
    matched_errors: list = field(default_factory=list)
    max_error: float | None = None
    permutation: list | None = None
    error_over_noise: float | None = None
    passes: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _ratio(num, den):
    if num == 0:
        return 0.0
    return num / den if den > 0 else math.inf


def assumption_report(inst, delta, estimates=None, n_dirs=32, seed=0, sigma_iters=200):
    """Measure every assumption on a ground-truth instance.

    If ``estimates`` (d x k) are given, they are matched to the true
    vertices and compared with the recovery bound ``150 k^4 sigma /
    (alpha sqrt(delta))``.
    """
    A, P, M = inst.A, np.asarray(inst.P), np.asarray(inst.M)
    d, n = A.shape
    k = M.shape[1]
    alpha = measure_alpha(M)
    sigma, change = measure_sigma(A, P, iters=sigma_iters, seed=seed, return_change=True)
    noise = sigma / math.sqrt(delta)
    prox = check_proximity(P, M, sigma, delta)
    min_norm = float(np.linalg.norm(M, axis=0).min())
    spectral_ratio = _ratio(noise, alpha**3 * min_norm / (4500.0 * k**9))
    spectral_ratio_free = _ratio(noise, alpha * min_norm)

    s_MtM = small_svd(M.T @ M)[0]
    s_k_M = math.sqrt(max(s_MtM[k - 1], 0.0))
    if k <= min(d, n):
        Q = subspace_power(P, k, 60, seed)
        B = Q.T @ P
        s_k_P = math.sqrt(max(small_svd(B @ B.T)[0][k - 1], 0.0))
    else:
        s_k_P = 0.0

    to_k, from_k = hausdorff_estimate(A, M, delta, n_dirs=n_dirs, seed=seed)
    bound_150 = _ratio(150.0 * k**4 * noise, alpha)
    report = DiagnosticsReport(
        k=k, n=n, d=d, delta=delta, alpha=alpha, sigma=sigma, sigma_change=change,
        noise_radius=4.0 * noise, proximity_counts=prox.counts,
        delta_realized=prox.delta_realized, spectral_ratio=spectral_ratio,
        spectral_ratio_free=spectral_ratio_free, s_k_M=s_k_M, s_k_P=s_k_P,
        s_k_P_over_sigma_sqrt_n=_ratio(s_k_P, sigma * math.sqrt(n)),
        hausdorff_K_to_Kprime=to_k, hausdorff_Kprime_to_K_lb=from_k,
        hausdorff_bound=5.0 * noise, bound_150=bound_150,
    )
    report.passes = {
        "well_separated": alpha > 0,
        "proximity": prox.passed,
        "spectral_bound": spectral_ratio <= 1.0,
    }
    if estimates is not None:
        match = match_vertices(estimates, M)
        report.matched_errors = match.errs
        report.max_error = match.max_err
        report.permutation = match.permutation
        report.error_over_noise = _ratio(match.max_err, noise)
        # roundoff allowance so exact recovery passes when sigma = 0
        slack = ROUNDOFF_ATOL * max(1.0, float(np.abs(M).max()))
        report.passes["recovery"] = match.max_err <= bound_150 + slack
    return report
