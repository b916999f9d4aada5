"""Ground-truth instance generators.

Each generator returns an :class:`Instance` holding the observed sparse data
``A`` together with the latent points ``P = M W``, the vertices ``M`` and the
convex weights ``W``, so recovered vertices can be checked against truth.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._rng import DOCUMENTS, EDGES, NOISE, TOPICS, WEIGHTS, make_rng
from .linalg import SparseMatrix, spectral_norm
from .simplex import subset_size

MODELS = ("lda", "mmsb", "adversarial_clustering", "custom")


@dataclass
class AdversaryPlan:
    """Protected column sets per cluster and the per-column displacements."""

    protected: list
    displacements: np.ndarray
    sigma: float
    radius: float


@dataclass
class Instance:
    A: SparseMatrix
    P: np.ndarray
    M: np.ndarray
    W: np.ndarray
    model: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    plan: AdversaryPlan | None = None

    @property
    def shape(self):
        return self.A.shape

    @property
    def k(self):
        return self.M.shape[1]

    def check(self, atol=1e-12):
        """Raise ``AssertionError`` if a structural invariant is violated."""
        d, n = self.A.shape
        k = self.M.shape[1]
        assert self.P.shape == (d, n) and self.M.shape == (d, k) and self.W.shape == (k, n)
        assert np.all(self.W >= 0), "negative convex weight"
        assert np.allclose(self.W.sum(axis=0), 1.0, rtol=0, atol=atol), "weights do not sum to 1"
        scale = max(1.0, float(np.abs(self.M).max(initial=0.0)))
        assert np.allclose(self.P, self.M @ self.W, rtol=0, atol=atol * scale), "P != M W"
        if self.model == "lda":
            data = self.A.csc.data
            assert np.all(data > 0)
            sums = np.asarray(self.A.csc.sum(axis=0)).ravel()
            assert np.allclose(sums, 1.0, rtol=0, atol=atol), "document does not sum to 1"
            per_col = np.diff(self.A.csc.indptr)
            assert per_col.max(initial=0) <= self.params["m_words"]
        if self.model == "mmsb":
            assert np.all(self.A.csc.data == 1.0), "adjacency entries must be 0/1"


def _log_gamma(rng, shape, size):
    # log of Gamma(shape, 1) draws; for shape < 1 use G(shape + 1) * U**(1/shape)
    # so tiny draws survive as finite logs instead of underflowing to 0
    if shape >= 1.0:
        return np.log(rng.standard_gamma(shape, size))
    g = rng.standard_gamma(shape + 1.0, size)
    u = 1.0 - rng.random(size)
    return np.log(g) + np.log(u) / shape


def dirichlet_weights(beta, k, n, rng):
    """``k x n`` matrix whose columns are iid symmetric Dirichlet(beta)."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if k < 1:
        raise ValueError("k must be >= 1")
    logs = _log_gamma(rng, beta, (k, n))
    logs -= logs.max(axis=0, keepdims=True)
    W = np.exp(logs)
    W /= W.sum(axis=0, keepdims=True)
    return W


def dirichlet_sample(beta, k, seed):
    """One symmetric Dirichlet(beta) vector of length ``k``."""
    return dirichlet_weights(beta, k, 1, make_rng(seed, WEIGHTS))[:, 0]


def power_law_topics(d, k, rng):
    """Topics with 1/rank mass over a random set of ``max(1, d // 10)`` words."""
    support = max(1, d // 10)
    weights = 1.0 / np.arange(1, support + 1)
    weights /= weights.sum()
    M = np.zeros((d, k))
    for ell in range(k):
        words = rng.permutation(d)[:support]
        M[words, ell] = weights
    return M


def _check_simplex_columns(M, what):
    if np.any(M < 0) or not np.allclose(M.sum(axis=0), 1.0, rtol=0, atol=1e-9):
        raise ValueError(f"{what} columns must lie on the unit simplex")


def _multinomial_columns(d, n, block, m_words, rng, chunk):
    if m_words < 1:
        raise ValueError("m_words must be >= 1")
    rows, cols, vals = [np.zeros(0, np.intp)], [np.zeros(0, np.intp)], [np.zeros(0)]
    for lo in range(0, n, chunk):
        pv = np.clip(block(lo, min(lo + chunk, n)).T, 0.0, None)
        pv /= pv.sum(axis=1, keepdims=True)
        counts = rng.multinomial(m_words, pv).T
        r, c = np.nonzero(counts)
        rows.append(r)
        cols.append(c + lo)
        vals.append(counts[r, c] / m_words)
    coo = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(d, n))
    return SparseMatrix(coo)


def sample_lda_documents(P, m_words, rng, chunk=4096):
    """Relative word frequencies of ``m_words``-word documents drawn from ``P``.

    Column ``j`` of the result is ``multinomial(m_words, P[:, j]) / m_words``.
    """
    P = np.asarray(P, dtype=np.float64)
    d, n = P.shape
    return _multinomial_columns(d, n, lambda lo, hi: P[:, lo:hi], m_words, rng, chunk)


def _lda_topics(d, k, topic_spec, seed):
    if isinstance(topic_spec, str):
        if topic_spec != "power_law":
            raise ValueError(f"unknown topic recipe {topic_spec!r}")
        return power_law_topics(d, k, make_rng(seed, TOPICS))
    M = np.array(topic_spec, dtype=np.float64, ndmin=2)
    if M.shape != (d, k):
        raise ValueError(f"topic matrix must be {d}x{k}, got {M.shape}")
    _check_simplex_columns(M, "topic")
    return M


def lda_data_matrix(d, n, k, m_words, beta, topic_spec="power_law", seed=0, chunk=4096):
    """The ``A`` of :func:`gen_lda` alone, without materializing ``P``.

    Meant for timing runs where ``d x n`` dense ground truth would not fit.
    """
    M = _lda_topics(d, k, topic_spec, seed)
    W = dirichlet_weights(beta, k, n, make_rng(seed, WEIGHTS))
    return _multinomial_columns(d, n, lambda lo, hi: M @ W[:, lo:hi], m_words,
                                make_rng(seed, DOCUMENTS), chunk)


def gen_lda(d, n, k, m_words, beta, topic_spec="power_law", seed=0):
    """Topic-model instance: Dirichlet topic weights, multinomial documents.

    Parameters
    ----------
    topic_spec : "power_law" or array_like, shape (d, k)
        Either explicit topic vectors on the unit simplex or the built-in
        power-law recipe.
    """
    if not d >= k >= 1:
        raise ValueError(f"need d >= k >= 1, got d={d}, k={k}")
    M = _lda_topics(d, k, topic_spec, seed)
    W = dirichlet_weights(beta, k, n, make_rng(seed, WEIGHTS))
    P = M @ W
    A = sample_lda_documents(P, m_words, make_rng(seed, DOCUMENTS))
    params = dict(d=d, n=n, k=k, m_words=m_words, beta=beta,
                  topic_spec=topic_spec if isinstance(topic_spec, str) else "explicit")
    return Instance(A=A, P=P, M=M, W=W, model="lda", params=params, seed=seed)


def gen_mmsb(d, n, k, B, beta, seed=0, chunk=4096):
    """Bipartite mixed-membership block model instance.

    ``M = W1.T @ B`` holds the community vectors over the ``d`` people of
    the first side and ``P = M @ W2``; edges are independent Bernoulli.
    """
    B = np.array(B, dtype=np.float64, ndmin=2)
    if B.shape != (k, k):
        raise ValueError(f"B must be {k}x{k}, got {B.shape}")
    if np.any(B < 0) or np.any(B > 1):
        raise ValueError("B entries must lie in [0, 1]")
    if d < k:
        raise ValueError(f"need d >= k, got d={d}, k={k}")
    W1 = dirichlet_weights(beta, k, d, make_rng(seed, WEIGHTS, 1))
    W2 = dirichlet_weights(beta, k, n, make_rng(seed, WEIGHTS, 2))
    M = W1.T @ B
    P = M @ W2
    rng = make_rng(seed, EDGES)
    blocks = []
    for lo in range(0, n, chunk):
        hits = rng.random((d, min(chunk, n - lo))) < P[:, lo:lo + chunk]
        blocks.append(sp.csc_matrix(hits.astype(np.float64)))
    A = SparseMatrix(sp.hstack(blocks, format="csc") if blocks else sp.csc_matrix((d, n)))
    nu = float(max(P.sum(axis=1).max(initial=0.0), P.sum(axis=0).max(initial=0.0)))
    params = dict(d=d, n=n, k=k, beta=beta, B=B.tolist(), nu=nu)
    return Instance(A=A, P=P, M=M, W=W2, model="mmsb", params=params, seed=seed)


def gen_adversarial_clustering(d, n, k, M, cluster_sizes, noise_scale, delta, adversary, seed=0):
    """Clustering instance with bounded noise and a hull-respecting adversary.

    Column ``j`` starts at its cluster's vertex. Uniform noise on
    ``[-noise_scale, noise_scale]`` per coordinate gives the base data and
    fixes ``sigma``. The first ``floor(delta n)`` columns of every cluster
    are protected; the adversary then pulls every column toward the mean of
    the other vertices, by the fraction ``adversary`` of the way for
    unprotected columns and by at most ``4 sigma / sqrt(delta)`` for
    protected ones. Data and latent points move together, so ``A - P`` is
    just the noise.
    """
    M = np.array(M, dtype=np.float64, ndmin=2)
    if M.shape != (d, k):
        raise ValueError(f"M must be {d}x{k}, got {M.shape}")
    sizes = [int(s) for s in cluster_sizes]
    if len(sizes) != k or sum(sizes) != n:
        raise ValueError(f"cluster sizes {sizes} must be k={k} counts summing to n={n}")
    if not 0 < delta <= 1.0 / k + 1e-12:
        raise ValueError(f"delta must lie in (0, 1/k], got {delta}")
    m = subset_size(delta, n)
    if m < 1 or min(sizes) < m:
        raise ValueError(f"infeasible sizes: every cluster needs >= floor(delta n) = {m} points")
    if not 0.0 <= adversary <= 1.0:
        raise ValueError("adversary strength must lie in [0, 1]")
    if noise_scale < 0:
        raise ValueError("noise_scale must be non-negative")
    for a in range(k):
        for b in range(a + 1, k):
            if np.array_equal(M[:, a], M[:, b]):
                raise ValueError(f"vertices {a} and {b} coincide")

    labels = np.repeat(np.arange(k), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    protected = [np.arange(s, s + m) for s in starts]
    is_protected = np.zeros(n, dtype=bool)
    for S in protected:
        is_protected[S] = True

    rng = make_rng(seed, NOISE)
    if noise_scale > 0:
        N = rng.uniform(-noise_scale, noise_scale, size=(d, n))
        sigma = spectral_norm(N, iters=200, seed=seed)[0] / np.sqrt(n)
    else:
        N = np.zeros((d, n))
        sigma = 0.0
    radius = 4.0 * sigma / np.sqrt(delta)

    W = np.zeros((k, n))
    W[labels, np.arange(n)] = 1.0
    if k > 1 and adversary > 0:
        centroids = (M.sum(axis=1, keepdims=True) - M) / (k - 1)
        gaps = np.linalg.norm(centroids - M, axis=0)
        frac = np.full(n, float(adversary))
        # protected columns move at most radius (shrunk slightly against roundoff)
        cap = np.minimum(1.0, radius * (1.0 - 1e-9) / gaps[labels])
        frac[is_protected] = adversary * cap[is_protected]
        W = W * (1.0 - frac)
        others = np.ones((k, n))
        others[labels, np.arange(n)] = 0.0
        W += others * (frac / (k - 1))
    P = M @ W
    plan = AdversaryPlan(protected=protected, displacements=P - M[:, labels],
                         sigma=float(sigma), radius=float(radius))
    A = SparseMatrix(P + N)
    params = dict(d=d, n=n, k=k, cluster_sizes=sizes, noise_scale=noise_scale,
                  delta=delta, adversary=adversary, labels=labels.tolist())
    return Instance(A=A, P=P, M=M, W=W, model="adversarial_clustering",
                    params=params, seed=seed, plan=plan)


def gen_kmeans_counterexample(n, delta, noise_scale, seed=0, lift=1.0):
    """The two-cluster interval example on which 2-means is fooled.

    Vertices are -1 and +1 on a line, lifted to ``(x, lift)`` in the plane so
    that they are linearly independent. Every unprotected point is pushed a
    quarter of the way toward the other vertex, i.e. by 0.5, leaving
    ``floor(delta n)`` points near each true vertex.
    """
    if n % 2:
        raise ValueError("n must be even")
    M = np.array([[-1.0, 1.0], [lift, lift]])
    return gen_adversarial_clustering(2, n, 2, M, [n // 2, n // 2], noise_scale, delta, 0.25, seed)
