"""Learning the vertices of a latent k-simplex from perturbed data by subset smoothing."""
import os as _os

# LATSIMPLEX_THREADS caps BLAS/OpenMP threads; it only takes effect if set
# before numpy is first imported in the process.
_threads = _os.environ.get("LATSIMPLEX_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .diag import (  # noqa: E402
    DiagnosticsReport,
    assumption_report,
    check_proximity,
    dist_to_simplex,
    hausdorff_estimate,
    lloyd_kmeans,
    match_vertices,
    measure_alpha,
    measure_sigma,
)
from .gen import (  # noqa: E402
    AdversaryPlan,
    Instance,
    dirichlet_sample,
    gen_adversarial_clustering,
    gen_kmeans_counterexample,
    gen_lda,
    gen_mmsb,
)
from .linalg import (  # noqa: E402
    SparseMatrix,
    gram_schmidt,
    matvec,
    matvec_t,
    null_space_within,
    sin_theta,
    small_svd,
    spectral_norm,
    subspace_power,
)
from .simplex import (  # noqa: E402
    DegenerateSubspaceError,
    LlsConfig,
    LlsResult,
    lls,
    random_direction,
    subset_smooth_argmax,
)

__version__ = "0.1.0"
