import math

import numpy as np
import pytest
from hypothesis import strategies as st

from gintkernel.dataio import SparseVector


def random_vector(rng, dim, density=0.5, nonzero=True):
    x = rng.normal(size=dim) * (rng.random(dim) < density)
    if nonzero and not x.any():
        x[rng.integers(dim)] = rng.choice([-1.0, 1.0]) * (rng.random() + 0.1)
    return SparseVector.from_dense(x)


def dense_split(x):
    """Reference sign split written directly from the definition, 0-based slots."""
    out = [0.0] * (2 * len(x))
    for i, xi in enumerate(x):
        if xi > 0:
            out[2 * i] = xi
        else:
            out[2 * i + 1] = -xi
    return out


def dense_minmax(x, y, normalize):
    """Brute-force (sum of min, sum of max) over all 2D coordinates."""
    a, b = dense_split(x), dense_split(y)
    if normalize:
        sa, sb = sum(a), sum(b)
        a = [v / sa for v in a]
        b = [v / sb for v in b]
    smin = smax = 0.0
    for p, q in zip(a, b):
        smin += min(p, q)
        smax += max(p, q)
    return smin, smax


def oracle_gmm(x, y):
    smin, smax = dense_minmax(x, y, False)
    return smin / smax


def oracle_gint(x, y):
    return dense_minmax(x, y, True)[0]


def oracle_ngmm(x, y):
    smin, smax = dense_minmax(x, y, True)
    return smin / smax


@pytest.fixture
def rng():
    return np.random.default_rng(20161016)


finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


@st.composite
def sparse_vectors(draw, min_dim=1, max_dim=12, nonzero=False):
    dim = draw(st.integers(min_dim, max_dim))
    vals = draw(st.lists(finite, min_size=dim, max_size=dim))
    if nonzero and not any(vals):
        vals[draw(st.integers(0, dim - 1))] = draw(
            st.floats(min_value=1e-3, max_value=1e3) | st.floats(min_value=-1e3, max_value=-1e-3)
        )
    return SparseVector.from_dense(vals)


@st.composite
def vector_pairs(draw, max_dim=10, nonzero=True):
    dim = draw(st.integers(1, max_dim))
    mag = st.floats(min_value=1e-3, max_value=1e3)
    entry = st.one_of(st.just(0.0), mag, mag.map(lambda v: -v))
    out = []
    for _ in range(2):
        vals = draw(st.lists(entry, min_size=dim, max_size=dim))
        if nonzero and not any(vals):
            vals[0] = 1.0
        out.append(SparseVector.from_dense(vals))
    return tuple(out)


def isclose(a, b, tol):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
