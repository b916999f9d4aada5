"""On-disk formats.

* sparse data: MatrixMarket coordinate, real, general; 1-based indices;
  entries in column-major order.
* dense matrices: CSV, one row per line, 17 significant digits so every
  double survives a round trip unchanged.
* metadata: JSON.
"""
import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .gen import AdversaryPlan, Instance
from .linalg import SparseMatrix

MM_HEADER = "%%MatrixMarket matrix coordinate real general"
FLOAT_FMT = "%.17g"


class FormatError(ValueError):
    """A file could not be parsed; the message names the file and line."""


def write_mtx(path, A):
    A = A if isinstance(A, SparseMatrix) else SparseMatrix(A)
    csc = A.csc
    d, n = A.shape
    cols = np.repeat(np.arange(n), np.diff(csc.indptr))
    with open(path, "w") as fh:
        fh.write(MM_HEADER + "\n")
        fh.write(f"{d} {n} {A.nnz}\n")
        for i, j, v in zip(csc.indices.tolist(), cols.tolist(), csc.data.tolist()):
            fh.write(f"{i + 1} {j + 1} {FLOAT_FMT % v}\n")


def read_mtx(path):
    """Parse a MatrixMarket coordinate file into a :class:`SparseMatrix`."""
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip().lower() != MM_HEADER.lower():
        raise FormatError(f"{path}:1: expected header '{MM_HEADER}'")
    size = None
    rows, cols, vals = [], [], []
    seen = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if size is None:
            try:
                size = tuple(int(p) for p in parts)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad size line {line!r}") from None
            if len(size) != 3 or min(size) < 0:
                raise FormatError(f"{path}:{lineno}: size line needs 'rows cols nnz'")
            continue
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected 'row col value', got {line!r}")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: cannot parse entry {line!r}") from None
        if not (1 <= i <= size[0] and 1 <= j <= size[1]):
            raise FormatError(f"{path}:{lineno}: index ({i}, {j}) outside {size[0]}x{size[1]}")
        if not np.isfinite(v):
            raise FormatError(f"{path}:{lineno}: non-finite value")
        if (i, j) in seen:
            raise FormatError(f"{path}:{lineno}: duplicate entry ({i}, {j})")
        seen.add((i, j))
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if size is None:
        raise FormatError(f"{path}: missing size line")
    if len(vals) != size[2]:
        raise FormatError(f"{path}: header declares {size[2]} entries, found {len(vals)}")
    return SparseMatrix(sp.coo_matrix((vals, (rows, cols)), shape=size[:2]))


def write_csv(path, X):
    X = np.array(X, dtype=np.float64, ndmin=2)
    np.savetxt(path, X, fmt=FLOAT_FMT, delimiter=",")


def read_csv(path):
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}: {exc.msg}") from None


def save_instance(inst, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_mtx(out / "A.mtx", inst.A)
    write_csv(out / "M.csv", inst.M)
    write_csv(out / "P.csv", inst.P)
    write_csv(out / "W.csv", inst.W)
    meta = {"model": inst.model, "seed": inst.seed, "params": inst.params,
            "shape": list(inst.A.shape), "k": inst.k}
    if inst.plan is not None:
        meta["adversary_plan"] = {
            "protected": [S.tolist() for S in inst.plan.protected],
            "sigma": inst.plan.sigma,
            "radius": inst.plan.radius,
        }
    write_json(out / "meta.json", meta)


def load_instance(in_dir, require_truth=True):
    """Load an instance directory; ``P``/``M``/``W`` may be absent if not required."""
    src = Path(in_dir)
    A = read_mtx(src / "A.mtx")
    meta = read_json(src / "meta.json") if (src / "meta.json").exists() else {}
    truth = {}
    for name in ("M", "P", "W"):
        f = src / f"{name}.csv"
        truth[name] = read_csv(f) if f.exists() else None
    if require_truth and (truth["M"] is None or truth["P"] is None):
        raise FileNotFoundError(f"cannot verify, no P/M in {src}")
    plan = None
    if "adversary_plan" in meta:
        ap = meta["adversary_plan"]
        plan = AdversaryPlan(protected=[np.asarray(S) for S in ap["protected"]],
                             displacements=None, sigma=ap["sigma"], radius=ap["radius"])
    return Instance(A=A, P=truth["P"], M=truth["M"], W=truth["W"],
                    model=meta.get("model", "custom"), params=meta.get("params", {}),
                    seed=meta.get("seed", 0), plan=plan)


def save_result(result, out_dir, config=None):
    """Write an :class:`~latsimplex.simplex.LlsResult`.

    Everything except ``timing.json`` is a deterministic function of the
    inputs and seed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "subsets.txt", "w") as fh:
        for S in result.subsets:
            fh.write(" ".join(str(int(j)) for j in S) + "\n")
    write_csv(out / "estimates.csv", result.vertex_estimates)
    write_csv(out / "directions.csv", result.directions)
    meta = {
        "k": result.k,
        "seed": result.seed,
        "opt_values": [float(v) for v in result.opt_values],
        "repeated_subsets": [list(p) for p in result.repeated_subsets],
    }
    if config is not None:
        meta["config"] = config
    write_json(out / "result.json", meta)
    t = result.timings
    write_json(out / "timing.json", {
        "svd_ms": 1e3 * t.get("svd_seconds", 0.0),
        "rounds_ms": 1e3 * t.get("rounds_seconds", 0.0),
        "total_ms": 1e3 * (t.get("svd_seconds", 0.0) + t.get("rounds_seconds", 0.0)),
    })


def load_result(in_dir):
    """Return ``(subsets, estimates, directions, meta)`` from a result directory."""
    src = Path(in_dir)
    subsets = []
    with open(src / "subsets.txt") as fh:
        for lineno, line in enumerate(fh, start=1):
            try:
                subsets.append(np.array([int(t) for t in line.split()], dtype=np.intp))
            except ValueError:
                raise FormatError(f"{src / 'subsets.txt'}:{lineno}: non-integer index") from None
    estimates = read_csv(src / "estimates.csv")
    directions = read_csv(src / "directions.csv")
    meta = read_json(src / "result.json")
    return subsets, estimates, directions, meta
