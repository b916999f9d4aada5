import csv
import io as stdio
import json

import numpy as np
import pytest

from latsimplex import io
from latsimplex.cli import bench_rows, main
from latsimplex.gen import Instance, gen_lda
from latsimplex.linalg import SparseMatrix


def write_noiseless_instance(path):
    # two copies of each standard basis vector in the plane
    P = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
    W = P.copy()
    inst = Instance(A=SparseMatrix(P), P=P, M=np.eye(2), W=W, model="custom")
    io.save_instance(inst, path)
    return inst


class TestMatrixMarket:
    def test_roundtrip_bitwise(self, tmp_path, rng):
        D = rng.standard_normal((7, 9)) * (rng.random((7, 9)) < 0.4)
        D[0, 0] = 1 / 3
        D[1, 1] = 5e-324
        A = SparseMatrix(D)
        io.write_mtx(tmp_path / "a.mtx", A)
        B = io.read_mtx(tmp_path / "a.mtx")
        assert A == B
        io.write_mtx(tmp_path / "b.mtx", B)
        assert (tmp_path / "a.mtx").read_bytes() == (tmp_path / "b.mtx").read_bytes()

    def test_header_and_indexing(self, tmp_path):
        io.write_mtx(tmp_path / "a.mtx", SparseMatrix(np.array([[0.0, 2.0], [1.5, 0.0]])))
        lines = (tmp_path / "a.mtx").read_text().splitlines()
        assert lines == ["%%MatrixMarket matrix coordinate real general", "2 2 2", "2 1 1.5", "1 2 2"]

    @pytest.mark.parametrize(
        "body, lineno",
        [
            ("2 2 1\n1 1 x\n", 3),
            ("2 2 1\n3 1 1.0\n", 3),
            ("2 2 2\n1 1 1.0\n1 1 2.0\n", 4),
            ("2 2 1\n1 1 nan\n", 3),
            ("2 x 1\n", 2),
            ("2 2 1\n% comment\n1 1\n", 4),
        ],
    )
    def test_errors_name_line(self, tmp_path, body, lineno):
        f = tmp_path / "bad.mtx"
        f.write_text("%%MatrixMarket matrix coordinate real general\n" + body)
        with pytest.raises(io.FormatError, match=f"bad.mtx:{lineno}:"):
            io.read_mtx(f)

    def test_bad_header(self, tmp_path):
        f = tmp_path / "bad.mtx"
        f.write_text("%%MatrixMarket matrix array real general\n1 1\n1\n")
        with pytest.raises(io.FormatError, match=":1:"):
            io.read_mtx(f)

    def test_count_mismatch(self, tmp_path):
        f = tmp_path / "bad.mtx"
        f.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n")
        with pytest.raises(io.FormatError, match="declares 2"):
            io.read_mtx(f)


class TestInstanceFiles:
    def test_roundtrip(self, tmp_path):
        inst = gen_lda(30, 50, 3, 10, 0.5, seed=1)
        io.save_instance(inst, tmp_path / "a")
        back = io.load_instance(tmp_path / "a")
        assert back.A == inst.A
        np.testing.assert_array_equal(back.P, inst.P)
        np.testing.assert_array_equal(back.M, inst.M)
        np.testing.assert_array_equal(back.W, inst.W)
        io.save_instance(back, tmp_path / "b")
        for name in ("A.mtx", "M.csv", "P.csv", "W.csv", "meta.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_missing_truth(self, tmp_path):
        inst = gen_lda(10, 20, 2, 5, 0.5, seed=0)
        io.save_instance(inst, tmp_path)
        (tmp_path / "P.csv").unlink()
        with pytest.raises(FileNotFoundError, match="cannot verify"):
            io.load_instance(tmp_path)
        assert io.load_instance(tmp_path, require_truth=False).P is None


class TestCli:
    def test_generate_lda_k1(self, tmp_path):
        assert main(["generate", "--model", "lda", "--d", "10", "--n", "15", "--k", "1",
                     "--m-words", "5", "--out", str(tmp_path)]) == 0
        A = io.read_mtx(tmp_path / "A.mtx").toarray()
        assert np.all(A == A[:, [0]])
        assert np.count_nonzero(A[:, 0]) == 1 and A.sum(axis=0).tolist() == [1.0] * 15

    def test_generate_lda_nnz_bound(self, tmp_path):
        assert main(["generate", "--model", "lda", "--d", "100", "--n", "1000", "--k", "3",
                     "--out", str(tmp_path)]) == 0
        header = (tmp_path / "A.mtx").read_text().splitlines()[1]
        assert int(header.split()[2]) <= 50 * 1000

    def test_generate_reps(self, tmp_path):
        assert main(["generate", "--model", "mmsb", "--d", "20", "--n", "30", "--k", "2",
                     "--reps", "2", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "rep_000" / "A.mtx").exists() and (tmp_path / "rep_001" / "A.mtx").exists()

    def test_run_noiseless(self, tmp_path):
        write_noiseless_instance(tmp_path / "inst")
        assert main(["run", str(tmp_path / "inst"), "--k", "2", "--delta", "0.5",
                     "--out", str(tmp_path / "res")]) == 0
        est = io.read_csv(tmp_path / "res" / "estimates.csv")
        assert sorted(map(tuple, est.T)) == [(0.0, 1.0), (1.0, 0.0)]
        assert main(["verify", str(tmp_path / "inst"), str(tmp_path / "res")]) == 0
        report = json.loads((tmp_path / "res" / "report.json").read_text())
        assert report["max_error"] == 0.0 and report["hard_failures"] == []

    def test_run_deterministic(self, tmp_path):
        main(["generate", "--model", "cluster", "--d", "10", "--n", "300", "--k", "3",
              "--noise", "0.1", "--out", str(tmp_path / "inst")])
        for name in ("r1", "r2"):
            assert main(["run", str(tmp_path / "inst"), "--k", "3", "--delta", "0.1", "--seed", "4",
                         "--out", str(tmp_path / name)]) == 0
        files = sorted(p.name for p in (tmp_path / "r1").iterdir())
        assert "timing.json" in files
        for name in files:
            if name != "timing.json":
                assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()

    def test_run_k_too_large(self, tmp_path):
        write_noiseless_instance(tmp_path)
        assert main(["run", str(tmp_path), "--k", "3", "--delta", "0.2", "--out", str(tmp_path / "r")]) == 2

    def test_usage_errors(self, tmp_path):
        assert main(["run"]) == 2
        assert main(["frobnicate"]) == 2
        assert main(["generate", "--model", "lda", "--reps", "0", "--out", str(tmp_path)]) == 2
        write_noiseless_instance(tmp_path)
        assert main(["run", str(tmp_path), "--k", "2", "--delta", "0.9", "--out", str(tmp_path / "r")]) == 2

    def test_io_errors(self, tmp_path):
        assert main(["run", str(tmp_path / "missing.mtx"), "--k", "1", "--delta", "1",
                     "--out", str(tmp_path / "r")]) == 3
        bad = tmp_path / "bad.mtx"
        bad.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n")
        assert main(["run", str(bad), "--k", "1", "--delta", "1", "--out", str(tmp_path / "r")]) == 3

    def test_verify_garbage_fails(self, tmp_path):
        write_noiseless_instance(tmp_path / "inst")
        main(["run", str(tmp_path / "inst"), "--k", "2", "--delta", "0.5", "--out", str(tmp_path / "res")])
        io.write_csv(tmp_path / "res" / "estimates.csv", np.array([[40.0, -7.0], [13.0, 22.0]]))
        assert main(["verify", str(tmp_path / "inst"), str(tmp_path / "res")]) == 1

    def test_verify_missing_truth(self, tmp_path, capsys):
        write_noiseless_instance(tmp_path / "inst")
        main(["run", str(tmp_path / "inst"), "--k", "2", "--delta", "0.5", "--out", str(tmp_path / "res")])
        (tmp_path / "inst" / "M.csv").unlink()
        assert main(["verify", str(tmp_path / "inst"), str(tmp_path / "res")]) == 1
        assert "cannot verify, no P/M" in capsys.readouterr().err

    def test_bench_trivial(self, tmp_path, capsys):
        assert main(["bench", "--sizes", "20,40,80", "--d", "20", "--m-words", "5", "--reps", "1",
                     "--delta", "0.1", "--out", str(tmp_path / "b.csv")]) == 0
        rows = list(csv.DictReader(stdio.StringIO((tmp_path / "b.csv").read_text())))
        assert [int(r["n"]) for r in rows] == [20, 40, 80]
        assert set(rows[0]) == {"nnz", "d", "n", "k", "svd_ms", "rounds_ms", "total_ms", "rounds_ratio"}

    def test_bench_needs_three_points(self):
        assert main(["bench", "--sizes", "20,40"]) == 2
        assert main(["bench", "--sizes", "20,40,80", "--ks", "1,2,3"]) == 2

    def test_bench_rows_vary_k(self):
        rows = bench_rows([50], [1, 2, 3], 20, 5, 0.1, 0, 1, iters=2)
        assert [r["k"] for r in rows] == [1, 2, 3]
        assert np.isnan(rows[0]["rounds_ratio"])
