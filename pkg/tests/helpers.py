"""Independent reference implementations used as test oracles."""
import math

import numpy as np


def scalar_predict(model, x):
    """One row through the network with plain Python loops."""
    out = model.output_bias
    for h in range(model.hidden_count):
        s = model.input_bias[h]
        for j, xj in enumerate(x):
            s += model.input_weights[h, j] * xj
        out += model.output_weights[h] * math.tanh(s)
    return out


def fd_jacobian(residual_fn, theta, h=1e-6):
    theta = np.asarray(theta, dtype=float)
    cols = []
    for j in range(len(theta)):
        e = np.zeros_like(theta)
        e[j] = h
        cols.append((residual_fn(theta + e) - residual_fn(theta - e)) / (2 * h))
    return np.stack(cols, axis=1)


def max_rel_error(J, J_ref):
    """Largest column-wise error relative to the reference column's max magnitude."""
    err = np.max(np.abs(J - J_ref), axis=0)
    scale = np.max(np.abs(J_ref), axis=0)
    rel = np.where(scale > 0, err / np.where(scale > 0, scale, 1.0), err)
    return float(rel.max())


def random_dataset(n_rows, d, seed):
    from narxsoc.data import RegressorDataset

    rng = np.random.default_rng(seed)
    return RegressorDataset(
        d,
        rng.uniform(-1, 1, (n_rows, 4 * d)),
        rng.uniform(-1, 1, n_rows),
        np.full(n_rows, "rand", dtype=object),
        np.arange(n_rows, dtype=float),
    )
