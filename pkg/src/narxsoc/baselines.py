"""Memoryless comparators: exact GP regression and a fine CART regression tree.

Both map instantaneous (V, I, T) to SOC; they see no history.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, NotPositiveDefinite, ValidationError
from .numerics import cholesky_factor


class KernelKind(str, enum.Enum):
    EXPONENTIAL = "exponential"
    MATERN52 = "matern52"
    RATIONAL_QUADRATIC = "rq"


def kernel_eval(kind, length_scale: float, signal_var: float, alpha: float, r):
    """Stationary covariance as a function of Euclidean distance `r`."""
    kind = KernelKind(kind)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValidationError("distance must be non-negative")
    s = r / length_scale
    if kind is KernelKind.EXPONENTIAL:
        k = np.exp(-s)
    elif kind is KernelKind.MATERN52:
        q = np.sqrt(5.0) * s
        k = (1.0 + q + q**2 / 3.0) * np.exp(-q)
    else:
        k = (1.0 + s**2 / (2.0 * alpha)) ** (-alpha)
    return (signal_var * k)[()]


@dataclass(frozen=True)
class GprModel:
    kernel_kind: KernelKind
    length_scale: float
    signal_var: float
    noise_var: float
    alpha: float
    X: np.ndarray  # standardized training inputs
    dual_weights: np.ndarray
    y_mean: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    jitter: float = 0.0

    def kernel(self, A, B):
        return kernel_eval(self.kernel_kind, self.length_scale, self.signal_var, self.alpha, cdist(A, B))


DEFAULT_GRID = {
    "length_scale": (0.3, 1.0, 3.0, 10.0),
    "signal_var": (0.25, 1.0, 4.0),
    "alpha": (0.5, 1.0, 2.0),
}
DEFAULT_NOISE_GRID = (1e-4, 1e-2)
JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def _factor_with_jitter(K: np.ndarray):
    for jitter in JITTERS:
        try:
            return cholesky_factor(K + jitter * np.eye(len(K))), jitter
        except NotPositiveDefinite:
            continue
    raise NotPositiveDefinite("kernel matrix not positive definite even with jitter 1e-6")


def _fit_fixed(kind, ls, sf2, sn2, alpha, Xs, y, x_mean, x_scale) -> GprModel:
    y_mean = float(np.mean(y))
    K = kernel_eval(kind, ls, sf2, alpha, cdist(Xs, Xs)) + sn2 * np.eye(len(Xs))
    L, jitter = _factor_with_jitter(K)
    a = scipy.linalg.cho_solve((L, True), y - y_mean)
    return GprModel(KernelKind(kind), ls, sf2, sn2, alpha, Xs, a, y_mean, x_mean, x_scale, jitter)


def gpr_fit(
    X,
    y,
    kind,
    grid: dict | None = None,
    noise_grid=DEFAULT_NOISE_GRID,
    val_fraction: float = 0.2,
    seed: int = 0,
    max_train_rows: int = 2000,
) -> GprModel:
    """Exact GP with hyperparameters picked from a grid by held-out MSE.

    Rows beyond `max_train_rows` are dropped by seeded uniform subsampling.
    Features are standardized and targets centered before fitting.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise ValidationError("no training rows")
    if len(y) != len(X):
        raise DimensionMismatch("X and y lengths differ")
    kind = KernelKind(kind)
    rng = np.random.default_rng(seed)
    if len(X) > max_train_rows:
        keep = np.sort(rng.choice(len(X), max_train_rows, replace=False))
        X, y = X[keep], y[keep]

    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale == 0] = 1.0
    Xs = (X - x_mean) / x_scale

    grid = {**DEFAULT_GRID, **(grid or {})}
    alphas = grid["alpha"] if kind is KernelKind.RATIONAL_QUADRATIC else (1.0,)
    combos = list(itertools.product(grid["length_scale"], grid["signal_var"], noise_grid, alphas))

    best = combos[0]
    n_val = int(len(Xs) * val_fraction)
    if len(combos) > 1 and n_val >= 1 and len(Xs) - n_val >= 1:
        perm = rng.permutation(len(Xs))
        vi, ti = perm[:n_val], perm[n_val:]
        best_mse = np.inf
        for ls, sf2, sn2, alpha in combos:
            try:
                m = _fit_fixed(kind, ls, sf2, sn2, alpha, Xs[ti], y[ti], x_mean, x_scale)
            except NotPositiveDefinite:
                continue
            pred = m.kernel(Xs[vi], m.X) @ m.dual_weights + m.y_mean
            mse = float(np.mean((pred - y[vi]) ** 2))
            if mse < best_mse:
                best, best_mse = (ls, sf2, sn2, alpha), mse
    ls, sf2, sn2, alpha = best
    return _fit_fixed(kind, ls, sf2, sn2, alpha, Xs, y, x_mean, x_scale)


def gpr_predict(model: GprModel, Xq) -> np.ndarray:
    Xq = np.asarray(Xq, dtype=float)
    if Xq.size == 0:
        return np.empty(0)
    Xq = np.atleast_2d(Xq)
    if Xq.shape[1] != model.X.shape[1]:
        raise DimensionMismatch(f"query has {Xq.shape[1]} features, model expects {model.X.shape[1]}")
    Xs = (Xq - model.x_mean) / model.x_scale
    out = np.empty(len(Xs))
    for s in range(0, len(Xs), 4096):
        out[s : s + 4096] = model.kernel(Xs[s : s + 4096], model.X) @ model.dual_weights
    return out + model.y_mean


@dataclass
class TreeModel:
    """Flat array-of-nodes binary tree. Leaves have feature == -1."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)
    count: list[int] = field(default_factory=list)
    min_leaf: int = 1

    def _add(self, value, count) -> int:
        for lst, v in (
            (self.feature, -1),
            (self.threshold, np.nan),
            (self.left, -1),
            (self.right, -1),
            (self.value, value),
            (self.count, count),
        ):
            lst.append(v)
        return len(self.value) - 1

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f < 0)


def _best_split(X, y, min_leaf, min_gain):
    n = len(y)
    yc = y - y.mean()
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, ys = X[order, j], yc[order]
        csum = np.cumsum(ys)[:-1]
        nl = np.arange(1, n)
        # between-group sum of squares = SSE reduction of the split
        gain = csum**2 / nl + csum**2 / (n - nl)
        ok = (nl >= min_leaf) & (n - nl >= min_leaf) & (xs[1:] > xs[:-1])
        if not ok.any():
            continue
        gain = np.where(ok, gain, -np.inf)
        i = int(np.argmax(gain))
        if best is None or gain[i] > best[0]:
            best = (gain[i], j, 0.5 * (xs[i] + xs[i + 1]))
    if best is None or not (best[0] > 0 and best[0] >= min_gain):
        return None
    return best[1], best[2]


def tree_fit(X, y, min_leaf: int = 4, min_gain: float = 1e-12) -> TreeModel:
    """CART regression tree grown by exhaustive variance-reduction search."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise ValidationError("no training rows")
    if min_leaf < 1:
        raise ValidationError("min_leaf must be >= 1")
    tree = TreeModel(min_leaf=min_leaf)
    stack = [(tree._add(float(y.mean()), len(y)), np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        if len(idx) < 2 * min_leaf:
            continue
        split = _best_split(X[idx], y[idx], min_leaf, min_gain)
        if split is None:
            continue
        j, thr = split
        mask = X[idx, j] <= thr
        li, ri = idx[mask], idx[~mask]
        tree.feature[node], tree.threshold[node] = j, thr
        tree.left[node] = tree._add(float(y[li].mean()), len(li))
        tree.right[node] = tree._add(float(y[ri].mean()), len(ri))
        stack.append((tree.right[node], ri))
        stack.append((tree.left[node], li))
    return tree


def tree_apply(model: TreeModel, X) -> np.ndarray:
    """Leaf index reached by each row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    feature = np.asarray(model.feature)
    threshold = np.asarray(model.threshold)
    left, right = np.asarray(model.left), np.asarray(model.right)
    node = np.zeros(len(X), dtype=int)
    active = feature[node] >= 0
    while active.any():
        n = node[active]
        go_left = X[active, feature[n]] <= threshold[n]
        node[active] = np.where(go_left, left[n], right[n])
        active = feature[node] >= 0
    return node


def tree_predict(model: TreeModel, X) -> np.ndarray:
    return np.asarray(model.value)[tree_apply(model, X)]
