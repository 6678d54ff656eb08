"""NARX network: one tanh hidden layer over tapped-delay regressors, linear output.

Parameters flatten as ``[input_weights (row-major H x 4d), input_bias (H),
output_weights (H), output_bias]``. Hidden pre-activations are reduced with
an explicit product-and-sum along the feature axis rather than BLAS, so a
row's prediction is bitwise independent of how many rows are evaluated with
it; the open-loop and teacher-forced closed-loop paths rely on this.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import Normalizer, RegressorDataset
from .errors import DelayMismatch, SeedLengthMismatch, ValidationError

FORMAT_VERSION = 1
_CHUNK = 2048


@dataclass(frozen=True)
class NarxModel:
    hidden_count: int
    delay_count: int
    input_weights: np.ndarray
    input_bias: np.ndarray
    output_weights: np.ndarray
    output_bias: float
    normalizer: Normalizer | None = None

    def __post_init__(self):
        H, d = self.hidden_count, self.delay_count
        if H < 1 or d < 1:
            raise ValidationError("hidden_count and delay_count must be >= 1")
        shapes = {
            "input_weights": (H, 4 * d),
            "input_bias": (H,),
            "output_weights": (H,),
        }
        for name, shape in shapes.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValidationError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "output_bias", float(self.output_bias))

    @property
    def input_size(self) -> int:
        return 4 * self.delay_count

    @property
    def param_count(self) -> int:
        return n_params(self.hidden_count, self.delay_count)

    @property
    def model_id(self) -> str:
        return f"H{self.hidden_count}_D{self.delay_count}"

    def params(self) -> np.ndarray:
        return np.concatenate(
            [
                self.input_weights.ravel(),
                self.input_bias,
                self.output_weights,
                [self.output_bias],
            ]
        )

    def with_params(self, theta) -> "NarxModel":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.param_count,):
            raise ValidationError(f"expected {self.param_count} parameters, got {theta.shape}")
        H, m = self.hidden_count, self.input_size
        k = H * m
        return replace(
            self,
            input_weights=theta[:k].reshape(H, m),
            input_bias=theta[k : k + H],
            output_weights=theta[k + H : k + 2 * H],
            output_bias=theta[-1],
        )


def n_params(hidden_count: int, delay_count: int) -> int:
    return hidden_count * 4 * delay_count + 2 * hidden_count + 1


def init_model(H: int, d: int, seed: int = 0, normalizer: Normalizer | None = None) -> NarxModel:
    """Input weights ~ U(±1/√(4d)), biases and output weights per the same seeded stream."""
    if H < 1 or d < 1:
        raise ValidationError("H and d must be >= 1")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(4 * d)
    return NarxModel(
        H,
        d,
        rng.uniform(-bound, bound, (H, 4 * d)),
        rng.uniform(-0.1, 0.1, H),
        rng.uniform(-bound, bound, H),
        float(rng.uniform(-0.1, 0.1)),
        normalizer,
    )


def _features(model: NarxModel, ds) -> np.ndarray:
    if isinstance(ds, RegressorDataset):
        if ds.delay_count != model.delay_count:
            raise DelayMismatch(
                f"dataset has {ds.delay_count} delays, model has {model.delay_count}"
            )
        return ds.features
    X = np.asarray(ds, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.input_size:
        raise DelayMismatch(f"feature rows of width {model.input_size} expected, got {X.shape}")
    return X


def _hidden(model: NarxModel, X: np.ndarray) -> np.ndarray:
    W = model.input_weights
    out = np.empty((len(X), model.hidden_count))
    for s in range(0, len(X), _CHUNK):
        block = X[s : s + _CHUNK]
        out[s : s + _CHUNK] = (block[:, None, :] * W[None, :, :]).sum(axis=-1)
    return np.tanh(out + model.input_bias)


def _output(model: NarxModel, A: np.ndarray) -> np.ndarray:
    return (A * model.output_weights).sum(axis=-1) + model.output_bias


def forward_open_loop(model: NarxModel, ds) -> np.ndarray:
    """Normalized predictions for each regressor row (a dataset or an (N, 4d) array)."""
    X = _features(model, ds)
    return _output(model, _hidden(model, X))


def forward_closed_loop(
    model: NarxModel,
    exog: np.ndarray,
    soc_seed: np.ndarray,
    teacher: np.ndarray | None = None,
    clamp_feedback: bool = False,
) -> np.ndarray:
    """Parallel-mode rollout.

    `exog` is the normalized (N, 3) V/I/T series, `soc_seed` the normalized
    SOC at indices 0..d-1. Returns predictions for indices d..N-1. Each step
    feeds back the model's own previous d outputs; passing `teacher` (an
    N-length normalized SOC series) feeds those values back instead.
    """
    d = model.delay_count
    exog = np.asarray(exog, dtype=float)
    soc_seed = np.asarray(soc_seed, dtype=float)
    if exog.ndim != 2 or exog.shape[1] != 3:
        raise ValidationError(f"exogenous series must be (N, 3), got {exog.shape}")
    N = len(exog)
    if N <= d:
        raise ValidationError(f"need more than {d} samples, got {N}")
    if soc_seed.shape != (d,):
        raise SeedLengthMismatch(f"soc_seed must have length {d}, got {soc_seed.shape}")
    if teacher is not None:
        teacher = np.asarray(teacher, dtype=float)
        if teacher.shape != (N,):
            raise SeedLengthMismatch(f"teacher series must have length {N}")

    feedback = np.empty(N)
    feedback[:d] = soc_seed
    out = np.empty(N - d)
    row = np.empty((1, 4 * d))
    for t in range(d, N):
        # lag 1 first within each block
        for k in range(3):
            row[0, k * d : (k + 1) * d] = exog[t - d : t, k][::-1]
        row[0, 3 * d :] = feedback[t - d : t][::-1]
        y = _output(model, _hidden(model, row))[0]
        out[t - d] = y
        if teacher is not None:
            feedback[t] = teacher[t]
        else:
            feedback[t] = min(max(y, -1.0), 1.0) if clamp_feedback else y
    return out


def jacobian(model: NarxModel, ds) -> tuple[np.ndarray, np.ndarray]:
    """Residuals ``prediction - target`` and their N x P Jacobian (analytic backprop)."""
    if not isinstance(ds, RegressorDataset):
        raise ValidationError("jacobian needs a RegressorDataset with targets")
    X = _features(model, ds)
    if len(X) < 1:
        raise ValidationError("empty dataset")
    A = _hidden(model, X)
    r = _output(model, A) - ds.targets
    G = (1.0 - A**2) * model.output_weights  # d r / d pre-activation
    N, H = A.shape
    J = np.empty((N, model.param_count))
    k = H * model.input_size
    J[:, :k] = (G[:, :, None] * X[:, None, :]).reshape(N, k)
    J[:, k : k + H] = G
    J[:, k + H : k + 2 * H] = A
    J[:, -1] = 1.0
    return J, r


def sse(model: NarxModel, ds: RegressorDataset) -> float:
    r = forward_open_loop(model, ds) - ds.targets
    return float(r @ r)


def _floats(a) -> list[float]:
    return [float(v) for v in np.ravel(a)]


def model_to_dict(model: NarxModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "hidden_count": model.hidden_count,
        "delay_count": model.delay_count,
        "normalizer": model.normalizer.to_dict() if model.normalizer else None,
        "input_weights": _floats(model.input_weights),
        "input_bias": _floats(model.input_bias),
        "output_weights": _floats(model.output_weights),
        "output_bias": model.output_bias,
    }


def model_from_dict(d: dict) -> NarxModel:
    if d.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported model format_version {d.get('format_version')!r}")
    H, D = int(d["hidden_count"]), int(d["delay_count"])
    norm = Normalizer.from_dict(d["normalizer"]) if d.get("normalizer") else None
    return NarxModel(
        H,
        D,
        np.asarray(d["input_weights"], dtype=float).reshape(H, 4 * D),
        np.asarray(d["input_bias"], dtype=float),
        np.asarray(d["output_weights"], dtype=float),
        float(d["output_bias"]),
        norm,
    )


def save_model(model: NarxModel, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> NarxModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a model file ({exc})") from None
    return model_from_dict(d)
