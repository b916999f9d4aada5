"""Command-line driver: generate, run, verify, bench.

Exit codes: 0 success, 1 verification or algorithm failure, 2 usage error,
3 I/O error.
"""
import argparse
import csv
import io as _io
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from ._rng import make_rng
from .diag import assumption_report
from .gen import gen_adversarial_clustering, gen_lda, gen_mmsb, lda_data_matrix
from .simplex import DegenerateSubspaceError, LlsConfig, lls

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cluster_vertices(d, k, seed, scale=1.0):
    """Random vertex matrix for clustering instances: Gaussian columns of norm ``scale``."""
    M = make_rng(seed, 99).standard_normal((d, k))
    return scale * M / np.linalg.norm(M, axis=0)


def equal_sizes(n, k):
    base, extra = divmod(n, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def build_instance(args, seed):
    if args.model == "lda":
        return gen_lda(args.d, args.n, args.k, args.m_words, args.beta or 1.0 / args.k, seed=seed)
    if args.model == "mmsb":
        B = np.full((args.k, args.k), args.b_off)
        np.fill_diagonal(B, args.b_diag)
        return gen_mmsb(args.d, args.n, args.k, B, args.beta or 1.0 / args.k, seed=seed)
    M = cluster_vertices(args.d, args.k, seed, args.vertex_norm)
    delta = args.delta if args.delta is not None else 1.0 / (2 * args.k)
    return gen_adversarial_clustering(args.d, args.n, args.k, M, equal_sizes(args.n, args.k),
                                      args.noise, delta, args.adversary, seed=seed)


def cmd_generate(args):
    out = Path(args.out)
    for rep in range(args.reps):
        seed = args.seed + rep
        inst = build_instance(args, seed)
        target = out if args.reps == 1 else out / f"rep_{rep:03d}"
        io.save_instance(inst, target)
        print(f"wrote {target} ({inst.model}, {inst.A.shape[0]}x{inst.A.shape[1]}, nnz={inst.A.nnz})")
    return EXIT_OK


def _load_matrix(path):
    path = Path(path)
    return io.read_mtx(path / "A.mtx" if path.is_dir() else path)


def cmd_run(args):
    A = _load_matrix(args.input)
    d, n = A.shape
    if args.k > min(d, n):
        raise UsageError(f"--k {args.k} exceeds min(d, n) = {min(d, n)}")
    try:
        cfg = LlsConfig(k=args.k, delta=args.delta, power_iters=args.iters, seed=args.seed,
                        use_exact_svd=args.exact_svd)
        cfg.subset_size(n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = lls(A, cfg)
    config = {"k": cfg.k, "delta": cfg.delta, "power_iters": cfg.iterations(d), "seed": cfg.seed,
              "use_exact_svd": cfg.use_exact_svd, "m": cfg.subset_size(n)}
    io.save_result(result, args.out, config)
    t = result.timings
    print(f"wrote {args.out}: svd {1e3 * t['svd_seconds']:.1f} ms, rounds {1e3 * t['rounds_seconds']:.1f} ms")
    if result.repeated_subsets:
        print(f"warning: identical subsets returned in rounds {result.repeated_subsets}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args):
    try:
        inst = io.load_instance(args.instance, require_truth=True)
    except FileNotFoundError as exc:
        if "cannot verify" in str(exc):
            print(str(exc), file=sys.stderr)
            return EXIT_FAIL
        raise
    subsets, estimates, _, meta = io.load_result(args.result)
    delta = args.delta if args.delta is not None else meta.get("config", {}).get("delta")
    if delta is None:
        raise UsageError("delta unknown: pass --delta or verify a result written by 'run'")
    if estimates.shape != inst.M.shape:
        print(f"estimates have shape {estimates.shape}, truth has {inst.M.shape}", file=sys.stderr)
        return EXIT_FAIL
    report = assumption_report(inst, delta, estimates=estimates, seed=args.seed)
    hard = []
    if not np.all(np.isfinite(estimates)):
        hard.append("non-finite estimates")
    if meta.get("repeated_subsets"):
        hard.append(f"repeated subsets {meta['repeated_subsets']}")
    data = report.to_dict()
    data["hard_failures"] = hard
    out = Path(args.out) if args.out else Path(args.result) / "report.json"
    io.write_json(out, data)
    ok = report.passes["recovery"] and not hard
    print(f"max matched error {report.max_error:.6g}, bound {report.bound_150:.6g}, "
          f"error/(sigma/sqrt(delta)) {report.error_over_noise:.4g}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def bench_rows(sizes, k_values, d, m_words, delta, seed, reps, iters=None):
    """Time LLS on LDA instances; one row per (size, k).

    Every configuration gets one untimed warm-up run. Repetitions are then
    interleaved across configurations, so a transient slowdown of the host
    touches all rows alike, and each phase is reported as its best time.
    """
    k_gen = max(k_values)
    configs = []
    for n in sizes:
        A = lda_data_matrix(d, n, k_gen, m_words, 1.0 / k_gen, seed=seed)
        for k in k_values:
            configs.append((A, LlsConfig(k=k, delta=min(delta, 1.0 / k), power_iters=iters, seed=seed)))
    for A, cfg in configs:
        lls(A, cfg)
    svd = [[] for _ in configs]
    rounds = [[] for _ in configs]
    for _ in range(reps):
        for i, (A, cfg) in enumerate(configs):
            t = lls(A, cfg).timings
            svd[i].append(t["svd_seconds"])
            rounds[i].append(t["rounds_seconds"])
    rows = []
    for i, (A, cfg) in enumerate(configs):
        svd_ms, rounds_ms = 1e3 * min(svd[i]), 1e3 * min(rounds[i])
        rows.append({"nnz": A.nnz, "d": d, "n": A.n_cols, "k": cfg.k, "svd_ms": svd_ms,
                     "rounds_ms": rounds_ms, "total_ms": svd_ms + rounds_ms})
    # ratio to the previous row along the varied axis
    prev = None
    for row in rows:
        row["rounds_ratio"] = row["rounds_ms"] / prev["rounds_ms"] if prev else math.nan
        prev = row
    return rows


BENCH_FIELDS = ["nnz", "d", "n", "k", "svd_ms", "rounds_ms", "total_ms", "rounds_ratio"]


def cmd_bench(args):
    sizes = args.sizes
    ks = args.ks or [args.k]
    if len(sizes) < 3 and len(ks) < 3:
        raise UsageError("bench needs at least 3 sizes (--sizes) or 3 values of k (--ks)")
    if len(sizes) > 1 and len(ks) > 1:
        raise UsageError("vary either --sizes or --ks, not both")
    rows = bench_rows(sizes, ks, args.d, args.m_words, args.delta, args.seed, args.reps, args.iters)
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def make_parser():
    p = argparse.ArgumentParser(prog="latsimplex", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic instance with ground truth")
    g.add_argument("--model", choices=["lda", "mmsb", "cluster"], required=True)
    g.add_argument("--d", type=int, default=100)
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--reps", type=int, default=1)
    g.add_argument("--out", required=True)
    g.add_argument("--m-words", type=int, default=50, help="words per document (lda)")
    g.add_argument("--beta", type=float, default=None, help="Dirichlet concentration, default 1/k")
    g.add_argument("--b-diag", type=float, default=0.4, help="within-community edge probability (mmsb)")
    g.add_argument("--b-off", type=float, default=0.05, help="across-community edge probability (mmsb)")
    g.add_argument("--noise", type=float, default=0.1, help="uniform noise half-width (cluster)")
    g.add_argument("--delta", type=float, default=None, help="protected fraction (cluster), default 1/(2k)")
    g.add_argument("--adversary", type=float, default=0.0, help="adversary strength in [0, 1] (cluster)")
    g.add_argument("--vertex-norm", type=float, default=1.0, help="vertex length (cluster)")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="recover vertices from A")
    r.add_argument("input", help="MatrixMarket file or instance directory")
    r.add_argument("--k", type=int, required=True)
    r.add_argument("--delta", type=float, required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--iters", type=int, default=None, help="power iterations, default ceil(10 ln d)")
    r.add_argument("--exact-svd", action="store_true", help="dense SVD instead of power iteration")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="score a result against ground truth")
    v.add_argument("instance")
    v.add_argument("result")
    v.add_argument("--delta", type=float, default=None)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default=None, help="report path, default RESULT/report.json")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="time the two phases on growing LDA instances")
    b.add_argument("--sizes", type=_int_list, default=[20000, 40000, 80000, 160000])
    b.add_argument("--ks", type=_int_list, default=None)
    b.add_argument("--k", type=int, default=3)
    b.add_argument("--d", type=int, default=1000)
    b.add_argument("--m-words", type=int, default=50)
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--iters", type=int, default=None)
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if getattr(args, "reps", 1) < 1:
        print("error: --reps must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateSubspaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, io.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
