"""Command-line entry point: ``gintkernel {kernel,hash,traineval,estimate,knn}``.

Data goes to files or stdout; diagnostics and timing lines go to stderr.
"""
from __future__ import annotations

import argparse
import sys
import time
from contextlib import contextmanager

import numpy as np

from . import ann, dataio, linclf
from .encode import check_bits, encoded_matrix
from .gcws import CollisionMode, EmptyRowError, GcwsConfig, GcwsSketch, collision_rate, sketch_matrix
from .kernels import KernelKind, KernelSpec, kernel_matrix, ngmm

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_GAMMA_GRID = (0.001, 0.01, 0.1, 1.0, 10.0)


class CommandError(Exception):
    pass


@contextmanager
def _timed(phase):
    t0 = time.perf_counter()
    yield
    print(f"[time] {phase}: {time.perf_counter() - t0:.3f}s", file=sys.stderr)


def _float_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _read_pair(train_path, test_path):
    """Read train and optional test files over a common dimension."""
    train = dataio.read_sparse_dataset(train_path)
    if test_path is None:
        return train, None
    test = dataio.read_sparse_dataset(test_path)
    dim = max(train.dim, test.dim)
    return dataio.with_dim(train, dim), dataio.with_dim(test, dim)


def _fmt_gamma(g):
    return format(g, "g")


def cmd_kernel(args):
    if args.kind == KernelKind.RBF.value:
        gammas = list(DEFAULT_GAMMA_GRID) if args.gamma_grid else (args.gamma or [])
    else:
        gammas = [None]
    train, test = _read_pair(args.train, args.test)
    X = train.to_csr()
    Y = test.to_csr() if test is not None else None
    test_out = args.test_out or args.out + ".test"
    for gamma in gammas:
        spec = KernelSpec(args.kind, gamma)
        suffix = f".gamma{_fmt_gamma(gamma)}" if len(gammas) > 1 else ""
        with _timed(f"kernel {spec} train"):
            K = kernel_matrix(spec, X, n_jobs=args.n_jobs)
        dataio.write_precomputed_kernel(K, train.labels, args.out + suffix, n_train=len(train))
        print(f"{spec} train kernel {K.rows}x{K.cols} -> {args.out + suffix}")
        if Y is not None:
            with _timed(f"kernel {spec} test"):
                Kt = kernel_matrix(spec, Y, X, n_jobs=args.n_jobs)
            dataio.write_precomputed_kernel(Kt, test.labels, test_out + suffix, n_train=len(train))
            print(f"{spec} test kernel {Kt.rows}x{Kt.cols} -> {test_out + suffix}")
    return 0


def _sketch_dataset(data, config, normalize, n_jobs=1):
    try:
        return sketch_matrix(data.to_csr(), config, normalize=normalize, n_jobs=n_jobs)
    except EmptyRowError as exc:
        where = exc.rows
        if data.source_lines is not None:
            where = [data.source_lines[r] for r in exc.rows]
        raise CommandError(f"zero vectors cannot be hashed (lines {where[:20]})") from None


def cmd_hash(args):
    with _timed("read"):
        data = dataio.read_sparse_dataset(args.input)
    config = GcwsConfig(args.k, args.seed)
    with _timed("hash"):
        i_star, t_star = _sketch_dataset(data, config, args.normalize, args.n_jobs)
    with _timed("encode"):
        F = encoded_matrix(i_star, args.b)
    dataio.write_sparse_matrix(F, data.labels, args.out)
    if args.dump_sketch:
        with open(args.dump_sketch, "w", encoding="utf-8", newline="\n") as fh:
            for a, t in zip(i_star, t_star):
                fh.write(GcwsSketch(2 * data.dim, config, a, t).dumps() + "\n")
    print(f"hashed {len(data)} vectors: k={args.k} b={args.b} "
          f"{'ngmm' if args.normalize else 'gmm'} -> {args.out} ({F.shape[1]} features)")
    return 0


def cmd_traineval(args):
    train, test = _read_pair(args.train, args.test)
    Xtr, Xte = train.to_csr(), test.to_csr()
    print(f"{'C':>10} {'train_acc':>10} {'test_acc':>10}")
    best = None
    for c in args.c_grid:
        with _timed(f"train C={c:g}"):
            model = linclf.train(Xtr, c, args.epochs, args.step, labels=train.labels)
        acc_tr = linclf.evaluate(model, Xtr, train.labels)
        acc_te = linclf.evaluate(model, Xte, test.labels)
        print(f"{c:>10g} {acc_tr:>10.4f} {acc_te:>10.4f}")
        if best is None or acc_te > best[1]:
            best = (c, acc_te)
    print(f"best C={best[0]:g} test_acc={best[1]:.4f}")
    return 0


def cmd_estimate(args):
    data = dataio.read_sparse_dataset(args.input)
    nonzero = [r for r, v in enumerate(data.vectors) if not v.is_zero()]
    if len(nonzero) < 2:
        raise CommandError("need at least 2 nonzero vectors")
    rng = np.random.default_rng(args.seed)
    config = GcwsConfig(args.k, args.seed)
    print(f"{'i':>6} {'j':>6} {'ngmm':>10} {'full':>10} {'zerobit':>10}")
    worst_zero = worst_full = 0.0
    for _ in range(args.pairs):
        i, j = (int(x) for x in rng.choice(nonzero, size=2, replace=False))
        u, v = data.vectors[i], data.vectors[j]
        sub = dataio.LabeledDataset([u, v], [0, 0])
        i_star, t_star = sketch_matrix(sub.to_csr(), config)
        a = GcwsSketch(2 * data.dim, config, i_star[0], t_star[0])
        b = GcwsSketch(2 * data.dim, config, i_star[1], t_star[1])
        p = ngmm(u, v)
        full = collision_rate(a, b, CollisionMode.FULL)
        zero = collision_rate(a, b, CollisionMode.ZERO_BIT)
        worst_zero = max(worst_zero, abs(zero - p))
        worst_full = max(worst_full, abs(full - p))
        print(f"{i:>6} {j:>6} {p:>10.6f} {full:>10.6f} {zero:>10.6f}")
    print(f"max |full - ngmm| = {worst_full:.6f}")
    print(f"max |zerobit - ngmm| = {worst_zero:.6f}")
    return 0


def _fmt_hits(hits):
    return " ".join(f"{i}:{s:.6f}" for i, s in hits)


def cmd_knn(args):
    base, queries = _read_pair(args.index_data, args.queries)
    config = GcwsConfig(args.k, args.seed)
    with _timed("build"):
        index = ann.build(base.vectors, args.L, args.m, args.b, config)
    X = base.to_csr()
    Q = queries.to_csr()
    recalls = []
    with _timed("query"):
        for q in range(Q.shape[0]):
            hits = index.query(Q[q], args.top)
            print(f"query {q}: {_fmt_hits(hits)}")
            if args.brute:
                truth = ann.brute_force(X, Q[q], args.top)
                rec = len({i for i, _ in hits} & {i for i, _ in truth}) / args.top
                recalls.append(rec)
                print(f"brute {q}: {_fmt_hits(truth)}")
                print(f"recall@{args.top} {q}: {rec:.4f}")
    if recalls:
        print(f"mean recall@{args.top}: {np.mean(recalls):.4f}")
    if args.stats:
        with open(args.stats, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(index.dumps_stats())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="gintkernel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="export precomputed kernel matrices")
    p.add_argument("--train", required=True)
    p.add_argument("--test")
    p.add_argument("--kind", required=True, choices=[k.value for k in KernelKind])
    p.add_argument("--gamma", type=float, nargs="+", help="rbf scale(s); several values write one file each")
    p.add_argument("--gamma-grid", action="store_true",
                   help="use the default rbf grid " + ",".join(map(str, DEFAULT_GAMMA_GRID)))
    p.add_argument("--out", required=True, help="train x train kernel file")
    p.add_argument("--test-out", help="test x train kernel file (default: OUT.test)")
    p.add_argument("--n-jobs", type=int, default=1)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("hash", help="GCWS-hash and b-bit encode a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=_pos_int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="L1-normalize before hashing (NGMM); --no-normalize hashes GMM")
    p.add_argument("--out", required=True)
    p.add_argument("--dump-sketch", help="also write raw i_star:t_star signatures here")
    p.add_argument("--n-jobs", type=int, default=1)
    p.set_defaults(func=cmd_hash)

    p = sub.add_parser("traineval", help="train linear models over a C grid and report accuracy")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--c-grid", type=_float_list, default=list(DEFAULT_C_GRID))
    p.add_argument("--epochs", type=_pos_int, default=linclf.DEFAULT_EPOCHS)
    p.add_argument("--step", type=float, default=linclf.DEFAULT_STEP)
    p.set_defaults(func=cmd_traineval)

    p = sub.add_parser("estimate", help="compare exact NGMM with GCWS collision rates on random pairs")
    p.add_argument("--input", required=True)
    p.add_argument("--pairs", type=_pos_int, default=10)
    p.add_argument("--k", type=_pos_int, default=1024)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("knn", help="hash-table near-neighbor search")
    p.add_argument("--index-data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--top", type=_pos_int, default=10)
    p.add_argument("--L", type=_pos_int, default=32)
    p.add_argument("--m", type=_pos_int, default=2)
    p.add_argument("--b", type=int, default=8)
    p.add_argument("--k", type=_pos_int, default=64)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--brute", action="store_true", help="also report exact top results and recall")
    p.add_argument("--stats", help="write a bucket-size histogram per table here")
    p.set_defaults(func=cmd_knn)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "kernel" and args.kind == KernelKind.RBF.value:
        if not args.gamma and not args.gamma_grid:
            parser.error("--kind rbf requires --gamma or --gamma-grid")
        if args.gamma and any(not g > 0 for g in args.gamma):
            parser.error("--gamma values must be positive")
    elif args.command == "kernel" and (args.gamma or args.gamma_grid):
        parser.error("--gamma only applies to --kind rbf")
    if args.command in ("hash", "knn"):
        try:
            check_bits(args.b)
        except ValueError as exc:
            parser.error(str(exc))
    if args.command == "knn" and args.L * args.m > args.k:
        parser.error(f"--L * --m = {args.L * args.m} exceeds --k = {args.k}")
    try:
        return args.func(args)
    except (CommandError, ValueError, OSError) as exc:
        print(f"gintkernel {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
