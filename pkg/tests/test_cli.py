import subprocess
import sys

import numpy as np
import pytest

from gintkernel.cli import main
from gintkernel.dataio import read_precomputed_kernel, read_sparse_dataset, write_sparse_matrix
from gintkernel.datasets import make_clusters, make_xor


def write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def small(tmp_path):
    return write(tmp_path / "small.txt", "1 1:-5 2:3\n0 1:2 3:1\n# comment\n\n1 2:4 3:-1\n")


def test_kernel_ngmm_diagonal(tmp_path, small, capsys):
    out = tmp_path / "k.txt"
    assert main(["kernel", "--train", small, "--kind", "ngmm", "--out", str(out)]) == 0
    labels, K = read_precomputed_kernel(out)
    assert list(labels) == [1, 0, 1]
    assert K.shape == (3, 3)
    np.testing.assert_array_equal(np.diag(K), 1.0)
    np.testing.assert_array_equal(K, K.T)
    assert out.read_text().splitlines()[0].startswith("1 0:1 1:1 ")
    assert "[time]" in capsys.readouterr().err


def test_kernel_gint_vs_ngmm(tmp_path, small):
    main(["kernel", "--train", small, "--kind", "gint", "--out", str(tmp_path / "g")])
    main(["kernel", "--train", small, "--kind", "ngmm", "--out", str(tmp_path / "n")])
    _, G = read_precomputed_kernel(tmp_path / "g")
    _, N = read_precomputed_kernel(tmp_path / "n")
    np.testing.assert_allclose(N, G / (2 - G), atol=1e-12)


def test_kernel_train_and_test(tmp_path, small):
    test = write(tmp_path / "test.txt", "0 1:1 4:2\n")
    out = tmp_path / "k"
    assert main(["kernel", "--train", small, "--test", test, "--kind", "linear", "--out", str(out)]) == 0
    labels, K = read_precomputed_kernel(str(out) + ".test")
    assert list(labels) == [0] and K.shape == (1, 3)
    assert K[0].tolist() == [-5.0, 2.0, 0.0]


def test_kernel_rbf_gamma_handling(tmp_path, small, capsys):
    out = str(tmp_path / "r")
    with pytest.raises(SystemExit) as exc:
        main(["kernel", "--train", small, "--kind", "rbf", "--out", out])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["kernel", "--train", small, "--kind", "gmm", "--gamma", "1", "--out", out])
    assert exc.value.code == 2
    assert main(["kernel", "--train", small, "--kind", "rbf", "--gamma", "0.1", "1", "--out", out]) == 0
    _, K1 = read_precomputed_kernel(out + ".gamma0.1")
    _, K2 = read_precomputed_kernel(out + ".gamma1")
    assert np.all(K1 >= K2)
    assert main(["kernel", "--train", small, "--kind", "rbf", "--gamma-grid", "--out", out]) == 0
    assert (tmp_path / "r.gamma0.001").exists() and (tmp_path / "r.gamma10").exists()


def test_kernel_zero_vector_error(tmp_path, capsys):
    data = write(tmp_path / "z.txt", "1 1:1\n0\n")
    assert main(["kernel", "--train", data, "--kind", "gmm", "--out", str(tmp_path / "k")]) == 1
    assert "zero vector" in capsys.readouterr().err
    assert main(["kernel", "--train", data, "--kind", "linear", "--out", str(tmp_path / "k")]) == 0


def test_kernel_bad_file(tmp_path, capsys):
    data = write(tmp_path / "bad.txt", "1 1:1\n1 2:x\n")
    assert main(["kernel", "--train", data, "--kind", "gmm", "--out", str(tmp_path / "k")]) == 1
    assert "bad.txt:2:" in capsys.readouterr().err


def test_hash_structure(tmp_path):
    X, _ = make_clusters(20, 30, n_clusters=4, seed=1)
    data = tmp_path / "d.txt"
    write_sparse_matrix(X, np.arange(20) % 3, data)
    out = tmp_path / "h.txt"
    dump = tmp_path / "sk.txt"
    assert main(["hash", "--input", str(data), "--k", "64", "--b", "2", "--seed", "5",
                 "--out", str(out), "--dump-sketch", str(dump)]) == 0
    hashed = read_sparse_dataset(out)
    assert list(hashed.labels) == [r % 3 for r in range(20)]
    for v in hashed.vectors:
        assert v.nnz == 64
        assert v.indices.max() < 256
        assert np.all(v.values == 1.0)
    sk = dump.read_text().splitlines()
    assert len(sk) == 20 and all(len(line.split()) == 64 for line in sk)


def test_hash_identical_lines(tmp_path):
    data = write(tmp_path / "d.txt", "1 1:0.5 3:-2\n0 2:1\n1 1:0.5 3:-2\n1 1:1 3:-4\n")
    out = tmp_path / "h.txt"
    main(["hash", "--input", data, "--k", "32", "--b", "4", "--out", str(out)])
    lines = [line.split(" ", 1)[1] for line in out.read_text().splitlines()]
    assert lines[0] == lines[2] == lines[3]
    assert lines[0] != lines[1]


def test_hash_zero_vector_cites_line(tmp_path, capsys):
    data = write(tmp_path / "d.txt", "# header\n1 1:1\n0\n")
    assert main(["hash", "--input", data, "--k", "8", "--b", "2", "--out", str(tmp_path / "h")]) == 1
    assert "lines [3]" in capsys.readouterr().err


def test_hash_bad_bits(tmp_path, small):
    with pytest.raises(SystemExit) as exc:
        main(["hash", "--input", small, "--k", "8", "--b", "17", "--out", str(tmp_path / "h")])
    assert exc.value.code == 2


def test_outputs_deterministic_and_schedule_free(tmp_path):
    X, _ = make_clusters(40, 25, n_clusters=5, seed=2)
    data = tmp_path / "d.txt"
    write_sparse_matrix(X, np.zeros(40, int), data)
    runs = []
    for tag, jobs in (("a", "1"), ("b", "1"), ("c", "3")):
        h, k = tmp_path / f"h{tag}", tmp_path / f"k{tag}"
        main(["hash", "--input", str(data), "--k", "50", "--b", "8", "--seed", "3",
              "--out", str(h), "--n-jobs", jobs])
        main(["kernel", "--train", str(data), "--kind", "gint", "--out", str(k), "--n-jobs", jobs])
        runs.append((h.read_bytes(), k.read_bytes()))
    assert runs[0] == runs[1] == runs[2]


def test_traineval(tmp_path, capsys):
    X, y = make_xor(200, seed=1)
    train, test = tmp_path / "tr", tmp_path / "te"
    write_sparse_matrix(X[:100], y[:100], train)
    write_sparse_matrix(X[100:], y[100:], test)
    assert main(["traineval", "--train", str(train), "--test", str(test),
                 "--c-grid", "0.1,10", "--epochs", "30"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split() == ["C", "train_acc", "test_acc"]
    assert len(out) == 4 and out[-1].startswith("best C=")


def test_traineval_single_class(tmp_path, capsys):
    data = write(tmp_path / "d.txt", "1 1:1\n1 2:1\n")
    assert main(["traineval", "--train", data, "--test", data]) != 0
    assert "single class" in capsys.readouterr().err


def test_estimate(tmp_path, capsys):
    data = write(tmp_path / "d.txt", "1 1:1 2:-2\n0 1:3 2:-6\n1 1:-1 2:2\n")
    assert main(["estimate", "--input", data, "--pairs", "12", "--k", "256"]) == 0
    rows = [line.split() for line in capsys.readouterr().out.splitlines()[1:13]]
    for i, j, p, full, zero in rows:
        pair = {int(i), int(j)}
        assert len(pair) == 2
        if pair == {0, 1}:
            assert float(p) == float(full) == float(zero) == 1.0
        else:
            assert float(p) == float(full) == float(zero) == 0.0


def test_knn_own_points(tmp_path, capsys):
    X, _ = make_clusters(60, 20, n_clusters=6, seed=8)
    data = tmp_path / "d.txt"
    write_sparse_matrix(X, np.zeros(60, int), data)
    stats = tmp_path / "stats.txt"
    assert main(["knn", "--index-data", str(data), "--queries", str(data), "--top", "1",
                 "--L", "8", "--m", "2", "--k", "16", "--brute", "--stats", str(stats)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1] == "mean recall@1: 1.0000"
    assert len(stats.read_text().splitlines()) == 8


def test_knn_rejects_oversized_bands(tmp_path, small):
    with pytest.raises(SystemExit) as exc:
        main(["knn", "--index-data", small, "--queries", small, "--L", "10", "--m", "4", "--k", "16"])
    assert exc.value.code == 2


def test_module_entry_point(small, tmp_path):
    res = subprocess.run([sys.executable, "-m", "gintkernel", "kernel", "--train", small,
                          "--kind", "gmm", "--out", str(tmp_path / "k")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
