import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from narxsoc.baselines import (
    KernelKind,
    gpr_fit,
    gpr_predict,
    kernel_eval,
    tree_apply,
    tree_fit,
    tree_predict,
)
from narxsoc.errors import DimensionMismatch
from narxsoc.numerics import cholesky_factor
from scipy.spatial.distance import cdist

KINDS = list(KernelKind)


def single(kind, ls=1.0, sf2=1.0, sn2=1e-10, alpha=1.0):
    return dict(kind=kind, grid={"length_scale": (ls,), "signal_var": (sf2,), "alpha": (alpha,)}, noise_grid=(sn2,))


@pytest.mark.parametrize("kind", KINDS)
def test_kernel_at_zero(kind):
    assert kernel_eval(kind, 0.7, 2.5, 1.3, 0.0) == 2.5


def test_rq_value():
    assert kernel_eval("rq", 1.0, 1.0, 1.0, math.sqrt(2)) == pytest.approx(0.5, abs=1e-15)


def test_matern_value():
    expected = (1 + math.sqrt(5) + 5 / 3) * math.exp(-math.sqrt(5))
    assert kernel_eval("matern52", 1.0, 1.0, 1.0, 1.0) == pytest.approx(expected, rel=1e-14)
    assert kernel_eval("matern52", 1.0, 1.0, 1.0, 1.0) == pytest.approx(0.52400, abs=1e-5)


def test_exponential_value():
    assert kernel_eval("exponential", 2.0, 3.0, 1.0, 1.0) == pytest.approx(3 * math.exp(-0.5))


@settings(max_examples=20)
@given(kind=st.sampled_from(KINDS), n=st.integers(1, 50), seed=st.integers(0, 1000),
       ls=st.sampled_from([0.3, 1.0, 3.0, 10.0]), alpha=st.sampled_from([0.5, 1.0, 2.0]))
def test_kernel_matrix_valid_covariance(kind, n, seed, ls, alpha):
    X = np.random.default_rng(seed).normal(size=(n, 3))
    K = kernel_eval(kind, ls, 1.0, alpha, cdist(X, X))
    cholesky_factor(K + 1e-8 * np.eye(n))


@pytest.mark.parametrize("kind", KINDS)
def test_gp_interpolates(kind):
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(5, 3)), rng.uniform(0.2, 0.9, 5)
    m = gpr_fit(X, y, **single(kind))
    assert_allclose(gpr_predict(m, X), y, atol=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_gp_reverts_to_mean(kind):
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(5, 2)), rng.uniform(0.2, 0.9, 5)
    m = gpr_fit(X, y, **single(kind, ls=0.3))
    far = gpr_predict(m, [[1e4, -1e4]])
    assert abs(far[0] - y.mean()) < 1e-3


def test_gp_explicit_three_point():
    X = np.array([[0.0], [1.0], [2.5]])
    y = np.array([0.3, 0.5, 0.4])
    m = gpr_fit(X, y, **single("matern52", ls=1.0, sf2=1.0, sn2=0.01))
    Xs = (X - X.mean()) / X.std()
    q = np.array([[0.7], [1.9]])
    qs = (q - X.mean()) / X.std()

    def k(a, b):
        r = abs(a - b)
        return (1 + math.sqrt(5) * r + 5 * r * r / 3) * math.exp(-math.sqrt(5) * r)

    K = np.array([[k(a, b) for b in Xs[:, 0]] for a in Xs[:, 0]]) + (0.01 + m.jitter) * np.eye(3)
    Kinv = np.linalg.inv(K)
    expected = [np.array([k(a, b) for b in Xs[:, 0]]) @ Kinv @ (y - y.mean()) + y.mean() for a in qs[:, 0]]
    assert_allclose(gpr_predict(m, q), expected, rtol=1e-10)


def test_gp_query_cases():
    rng = np.random.default_rng(3)
    X, y = rng.normal(size=(30, 3)), rng.normal(size=30)
    m = gpr_fit(X, y, "exponential")
    assert gpr_predict(m, np.empty((0, 3))).shape == (0,)
    q = rng.normal(size=(6, 3))
    p = gpr_predict(m, q)
    assert gpr_predict(m, np.vstack([q[:1], q[:1]]))[0] == gpr_predict(m, np.vstack([q[:1], q[:1]]))[1]
    perm = rng.permutation(6)
    assert_allclose(gpr_predict(m, q[perm]), p[perm], rtol=1e-14)
    with pytest.raises(DimensionMismatch):
        gpr_predict(m, rng.normal(size=(2, 2)))


def test_gp_grid_search_and_subsample():
    rng = np.random.default_rng(4)
    X = rng.uniform(-2, 2, (300, 1))
    y = np.sin(2 * X[:, 0]) + rng.normal(0, 0.01, 300)
    m = gpr_fit(X, y, "rq", max_train_rows=100, seed=1)
    assert len(m.dual_weights) == 100
    assert m.length_scale in (0.3, 1.0, 3.0, 10.0)
    q = np.linspace(-1.5, 1.5, 20)[:, None]
    assert np.max(np.abs(gpr_predict(m, q) - np.sin(2 * q[:, 0]))) < 0.05
    again = gpr_fit(X, y, "rq", max_train_rows=100, seed=1)
    assert_array_equal(again.dual_weights, m.dual_weights)


def test_tree_constant():
    X = np.random.default_rng(0).normal(size=(50, 3))
    t = tree_fit(X, np.full(50, 0.42))
    assert t.n_leaves == 1
    assert_allclose(tree_predict(t, X), 0.42, rtol=1e-15)


def test_tree_step_function():
    x = np.linspace(0, 1, 40)
    X = np.column_stack([x, np.random.default_rng(1).normal(size=40)])
    y = np.where(x > 0.53, 2.0, -1.0)
    t = tree_fit(X, y, min_leaf=1)
    assert_array_equal(tree_predict(t, X), y)
    assert t.n_leaves == 2
    assert t.feature[0] == 0
    assert t.threshold[0] == pytest.approx(0.5 * (x[20] + x[21]))


def test_tree_min_leaf_audit():
    rng = np.random.default_rng(5)
    X, y = rng.normal(size=(200, 3)), rng.normal(size=200)
    t = tree_fit(X, y, min_leaf=4)
    leaves = tree_apply(t, X)
    counts = np.bincount(leaves, minlength=len(t.value))
    leaf_ids = [i for i, f in enumerate(t.feature) if f < 0]
    assert all(counts[i] >= 4 for i in leaf_ids)
    assert counts[leaf_ids].sum() == 200
    for i in leaf_ids:
        assert t.value[i] == pytest.approx(y[leaves == i].mean())


def test_tree_thresholds_are_midpoints():
    rng = np.random.default_rng(6)
    X, y = rng.normal(size=(60, 2)), rng.normal(size=60)
    t = tree_fit(X, y, min_leaf=3)
    members = {0: np.arange(60)}
    for node in range(len(t.feature)):
        f, idx = t.feature[node], members[node]
        if f < 0:
            continue
        thr = t.threshold[node]
        left = idx[X[idx, f] <= thr]
        right = idx[X[idx, f] > thr]
        assert thr == 0.5 * (X[left, f].max() + X[right, f].min())
        members[t.left[node]], members[t.right[node]] = left, right


@settings(max_examples=20)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 60))
def test_tree_memorizes_training_rows(seed, n):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(n, 3)), rng.normal(size=n)
    t = tree_fit(X, y, min_leaf=1, min_gain=0.0)
    assert_allclose(tree_predict(t, X), y, rtol=0, atol=1e-12)
