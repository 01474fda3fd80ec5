import math

import numpy as np
import pytest
from sklearn.base import clone

from gintkernel.dataio import SparseVector
from gintkernel.gcws import (
    CollisionMode,
    EmptyRowError,
    GCWSHasher,
    GcwsConfig,
    GcwsSketch,
    _variate_arrays,
    collision_rate,
    hash_one,
    sketch,
    sketch_matrix,
    variates,
)
from gintkernel.kernels import gmm, ngmm
from gintkernel.transform import TransformedVector, l1_normalize, transform

from conftest import random_vector

V = SparseVector.from_dense


def dense_gcws(x, seed, j, floor_value=1e-300):
    """Literal per-coordinate loop over all 2D slots; zero slots replaced by a tiny weight."""
    t_vec = l1_normalize(transform(V(x)))
    w = t_vec.to_dense()
    best = (math.inf, None, None)
    for i, wi in enumerate(w):
        wi = wi if wi > 0 else floor_value
        r, c, beta = variates(seed, j, i)
        t = math.floor(math.log(wi) / r + beta)
        z = math.exp(r * (t - beta))
        a = c / (z * math.exp(r))
        if a < best[0]:
            best = (a, i, t)
    return best[1], best[2]


class TestVariates:
    def test_deterministic(self):
        assert variates(11, 3, 17) == variates(11, 3, 17)
        assert variates(11, 3, 17) != variates(12, 3, 17)
        assert variates(11, 3, 17) != variates(11, 4, 17)

    def test_matches_batch_path(self):
        r, c, beta = _variate_arrays(5, np.arange(4), np.arange(6))
        assert variates(5, 2, 3) == (r[2, 3], c[2, 3], beta[2, 3])

    def test_moments(self):
        r, c, beta = _variate_arrays(2016, np.arange(1000), np.arange(1000))
        assert r.size == 10**6
        assert abs(r.mean() - 2.0) < 0.01
        assert abs(c.mean() - 2.0) < 0.01
        assert abs(beta.mean() - 0.5) < 0.002
        # Gamma(2, 1) variance is 2; Uniform variance 1/12
        assert abs(r.var() - 2.0) < 0.03
        assert abs(beta.var() - 1 / 12) < 0.001
        assert beta.min() >= 0.0 and beta.max() < 1.0 and r.min() > 0.0
        assert abs(np.corrcoef(r.ravel(), c.ravel())[0, 1]) < 0.005

    def test_seed_range(self):
        with pytest.raises(ValueError):
            GcwsConfig(4, seed=-1)
        with pytest.raises(ValueError):
            GcwsConfig(0)
        variates(2**64 - 1, 0, 0)


class TestHashOne:
    def test_singleton(self):
        t = TransformedVector(10, np.array([5]), np.array([1.0]), True)
        cfg = GcwsConfig(1, 9)
        for j in range(50):
            # weight 1: t = floor(0 / r + beta) = 0
            assert hash_one(t, cfg, j) == (5, 0)

    def test_identical_vectors(self, rng):
        u = random_vector(rng, 8)
        a, b = l1_normalize(transform(u)), l1_normalize(transform(V(u.to_dense())))
        cfg = GcwsConfig(1, 4)
        assert all(hash_one(a, cfg, j) == hash_one(b, cfg, j) for j in range(100))

    def test_empty(self):
        with pytest.raises(ValueError):
            hash_one(TransformedVector(4, np.array([], int), np.array([])), GcwsConfig(1), 0)

    def test_matches_sketch(self, rng):
        u = random_vector(rng, 6)
        cfg = GcwsConfig(40, 8)
        s = sketch(u, cfg)
        t = l1_normalize(transform(u))
        assert [hash_one(t, cfg, j) for j in range(40)] == s.signatures


class TestSketch:
    def test_dense_oracle(self, rng):
        for trial in range(40):
            dim = int(rng.integers(1, 6))
            u = random_vector(rng, dim, density=0.6)
            s = sketch(u, GcwsConfig(25, trial))
            for j in range(25):
                assert dense_gcws(u.to_dense(), trial, j) == tuple(s.signatures[j])

    def test_scale_invariance(self, rng):
        cfg = GcwsConfig(500, 1)
        for _ in range(10):
            u = random_vector(rng, 10)
            for c in (0.001, 0.37, 3.0, 1e4):
                assert sketch(u.scale(c), cfg) == sketch(u, cfg)

    def test_seed_sensitivity(self, rng):
        u = random_vector(rng, 20, density=1.0)
        assert sketch(u, GcwsConfig(64, 1)) != sketch(u, GcwsConfig(64, 2))

    def test_structure(self, rng):
        u = random_vector(rng, 7)
        s = sketch(u, GcwsConfig(33, 0))
        assert len(s) == 33 and s.dim2 == 14
        assert np.all((0 <= s.i_star) & (s.i_star < 14))
        assert set(s.i_star.tolist()) <= set(transform(u).indices.tolist())

    def test_empty(self):
        with pytest.raises(ValueError):
            sketch(SparseVector(3), GcwsConfig(4))

    def test_dump_format(self):
        s = GcwsSketch(6, GcwsConfig(2), np.array([3, 0]), np.array([-1, 0]))
        assert s.dumps() == "3:-1 0:0"

    def test_matrix_path_matches_and_is_schedule_free(self, rng):
        X = rng.normal(size=(25, 6)) * (rng.random((25, 6)) < 0.7)
        X[:, 2] += 0.5
        cfg = GcwsConfig(64, 77)
        i1, t1 = sketch_matrix(X, cfg, n_jobs=1)
        i4, t4 = sketch_matrix(X, cfg, n_jobs=4)
        assert np.array_equal(i1, i4) and np.array_equal(t1, t4)
        for r in range(25):
            s = sketch(V(X[r]), cfg)
            assert np.array_equal(s.i_star, i1[r]) and np.array_equal(s.t_star, t1[r])

    def test_matrix_zero_rows_reported(self):
        with pytest.raises(EmptyRowError) as err:
            sketch_matrix(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 2.0], [0.0, 0.0]]), GcwsConfig(4))
        assert err.value.rows == [1, 3]


class TestCollisionRate:
    def test_self(self, rng):
        s = sketch(random_vector(rng, 9), GcwsConfig(200, 3))
        assert collision_rate(s, s, CollisionMode.FULL) == 1.0
        assert collision_rate(s, s, "zerobit") == 1.0

    def test_disjoint(self):
        cfg = GcwsConfig(2000, 5)
        a, b = sketch(V([-5.0, 3.0]), cfg), sketch(V([2.0, -1.0]), cfg)
        assert collision_rate(a, b, "full") == 0.0
        assert collision_rate(a, b, "zerobit") == 0.0

    def test_zero_bit_dominates(self, rng):
        cfg = GcwsConfig(1000, 6)
        for _ in range(30):
            u, v = random_vector(rng, 5), random_vector(rng, 5)
            a, b = sketch(u, cfg), sketch(v, cfg)
            assert collision_rate(a, b, "zerobit") >= collision_rate(a, b, "full")

    def test_config_mismatch(self, rng):
        u = random_vector(rng, 4)
        with pytest.raises(ValueError):
            collision_rate(sketch(u, GcwsConfig(10, 1)), sketch(u, GcwsConfig(10, 2)))

    def test_estimates_ngmm(self, rng):
        k = 100_000
        u = random_vector(rng, 15, density=0.8)
        v = V(u.to_dense() + 0.7 * rng.normal(size=15))
        p = ngmm(u, v)
        cfg = GcwsConfig(k, 12)
        rate = collision_rate(sketch(u, cfg), sketch(v, cfg))
        assert abs(rate - p) <= 3 * math.sqrt(p * (1 - p) / k)

    def test_unbiased_over_seeds(self, rng):
        u = random_vector(rng, 6, density=1.0)
        v = V(u.to_dense() + rng.normal(size=6))
        p = ngmm(u, v)
        k, seeds = 200, 100
        rates = [collision_rate(sketch(u, GcwsConfig(k, s)), sketch(v, GcwsConfig(k, s)))
                 for s in range(seeds)]
        assert abs(np.mean(rates) - p) <= 3 * math.sqrt(p * (1 - p) / (k * seeds))

    def test_unnormalized_estimates_gmm(self, rng):
        k = 50_000
        u = random_vector(rng, 8, density=1.0)
        v = V(2.5 * u.to_dense() + rng.normal(size=8))
        p = gmm(u, v)
        cfg = GcwsConfig(k, 3)
        rate = collision_rate(sketch(u, cfg, normalize=False), sketch(v, cfg, normalize=False))
        assert abs(rate - p) <= 3 * math.sqrt(p * (1 - p) / k)
        assert abs(ngmm(u, v) - p) > 0.05


class TestHasher:
    def test_params_and_clone(self):
        h = GCWSHasher(k=16, seed=3, normalize=False)
        assert h.get_params() == {"k": 16, "seed": 3, "normalize": False, "n_jobs": 1}
        assert clone(h).get_params() == h.get_params()

    def test_transform(self, rng):
        X = rng.normal(size=(10, 4))
        h = GCWSHasher(k=32, seed=1).fit(X)
        out = h.transform(X)
        assert out.shape == (10, 32)
        sk = h.sketches(X[:2])
        assert np.array_equal(sk[0].i_star, out[0])
        assert sk[0] == sketch(V(X[0]), GcwsConfig(32, 1))
