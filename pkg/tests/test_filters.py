import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dags, random_dag
from dagconv.dag import Permutation, new_dag, permute_dag, transitive_closure
from dagconv.errors import DimensionMismatch
from dagconv.filters import build_filter, convolve, frequency_response, ls_design, ls_fit, shift_all
from dagconv.gso import gso_set


@pytest.fixture
def chain():
    return new_dag(3, [(1, 0, 1.0), (2, 1, 1.0)])


def test_chain_all_ones_filter(chain):
    f = build_filter(gso_set(chain), [1, 1, 1])
    np.testing.assert_allclose(f.dense(), [[3, 0, 0], [1, 2, 0], [1, 1, 1]], atol=1e-12)
    np.testing.assert_allclose(frequency_response(f), [3, 2, 1])


def test_theta_unit_vector_is_single_shift(ex7):
    g = gso_set(ex7)
    x = np.random.default_rng(0).standard_normal(7)
    for k in range(7):
        f = build_filter(g, np.eye(7)[k])
        np.testing.assert_allclose(convolve(f, x), g.members[k].mat @ x)


@settings(max_examples=40, deadline=None)
@given(dags(), st.integers(0, 2**32 - 1))
def test_filter_diagonalized_by_closure(d, seed):
    rng = np.random.default_rng(seed)
    c = transitive_closure(d)
    f = build_filter(gso_set(d, c), rng.uniform(-1, 1, d.n))
    h = f.dense()
    np.testing.assert_allclose(h @ c.w, c.w @ np.diag(frequency_response(f)), atol=1e-10)
    x = rng.standard_normal((d.n, 3))
    np.testing.assert_allclose(convolve(f, x), h @ x, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(dags(max_n=6), st.integers(0, 2**32 - 1))
def test_filters_are_shift_invariant(d, seed):
    g = gso_set(d)
    h = build_filter(g, np.random.default_rng(seed).standard_normal(d.n)).dense()
    for s in g:
        np.testing.assert_allclose(h @ s.dense(), s.dense() @ h, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(dags(min_n=2, max_n=9), st.integers(0, 2**32 - 1))
def test_filter_equivariance(d, seed):
    rng = np.random.default_rng(seed)
    p = Permutation.random(d.n, rng)
    anchors = sorted(rng.choice(d.n, size=max(1, d.n // 2), replace=False).tolist())
    theta = rng.standard_normal(len(anchors))
    x = rng.standard_normal(d.n)
    y = convolve(build_filter(gso_set(d, subset=anchors), theta), x)
    d2 = permute_dag(d, p)
    y2 = convolve(build_filter(gso_set(d2, subset=[p(k) for k in anchors]), theta), p.apply(x))
    assert np.max(np.abs(y2 - p.apply(y))) < 1e-9


def test_shift_all_layout(ex7):
    g = gso_set(ex7, subset=[1, 3])
    x = np.arange(14.0).reshape(7, 2)
    z = shift_all(g, x)
    assert z.shape == (2, 7, 2)
    np.testing.assert_allclose(z[1], g.members[1].mat @ x)
    with pytest.raises(DimensionMismatch):
        shift_all(g, np.ones(6))


def test_tap_count_checked(ex7):
    with pytest.raises(DimensionMismatch):
        build_filter(gso_set(ex7), [1.0, 2.0])


def test_taps_are_frozen(ex7):
    taps = np.ones(7)
    f = build_filter(gso_set(ex7), taps)
    taps[0] = 5
    assert f.theta[0] == 1
    with pytest.raises(ValueError):
        f.theta[0] = 2


def test_ls_recovers_generating_taps():
    rng = np.random.default_rng(1)
    d = random_dag(rng, 12, 0.3)
    g = gso_set(d)
    theta = rng.uniform(-1, 1, 12)
    xs = rng.standard_normal((50, 12))
    ys = convolve(build_filter(g, theta), xs.T).T
    est = ls_fit(g, (xs, ys))
    np.testing.assert_allclose(convolve(build_filter(g, est), xs.T).T, ys, atol=1e-8)
    # pair-list input gives the same answer
    np.testing.assert_allclose(ls_fit(g, list(zip(xs, ys))), est, atol=1e-10)


def test_ls_is_minimum_norm_when_underdetermined(chain):
    # one input on the source: S_0 x and S_1 x coincide in column 0, so the split is ambiguous
    g = gso_set(chain)
    x = np.array([[1.0, 0.0, 0.0]])
    design = ls_design(g, x)
    y = design @ np.array([1.0, 1.0, 1.0])
    est = ls_fit(g, (x, y.reshape(1, 3)))
    np.testing.assert_allclose(design @ est, y, atol=1e-10)
    np.testing.assert_allclose(est, np.linalg.pinv(design) @ y, atol=1e-10)


def test_ls_errors(ex7):
    g = gso_set(ex7)
    with pytest.raises(DimensionMismatch):
        ls_fit(g, [])
    with pytest.raises(DimensionMismatch):
        ls_fit(g, (np.ones((3, 7)), np.ones((3, 6))))
    with pytest.raises(DimensionMismatch):
        ls_design(g, np.ones((2, 5)))
