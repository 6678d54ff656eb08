"""Full-batch Levenberg-Marquardt training with validation early stopping.

The loop itself (:func:`levenberg_marquardt`) works on any least-squares
problem given as residual / Jacobian callables; :func:`lm_fit` wraps it for
NARX models.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import RegressorDataset
from .errors import NotPositiveDefinite, ValidationError
from .narx import NarxModel, forward_open_loop, jacobian
from .numerics import damped_step_from_normal, solve_damped_step

# mu never shrinks below this, so repeated decreases cannot underflow to zero
MU_FLOOR = 1e-20


@dataclass(frozen=True)
class TrainConfig:
    mu0: float = 1e-3
    mu_inc: float = 10.0
    mu_dec: float = 0.1
    mu_max: float = 1e10
    max_epochs: int = 1000
    max_val_fail: int = 6
    grad_tol: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if not self.mu_inc > 1:
            raise ValidationError("mu_inc must exceed 1")
        if not 0 < self.mu_dec < 1:
            raise ValidationError("mu_dec must lie in (0, 1)")
        if not self.mu_max > self.mu0 > 0:
            raise ValidationError("need mu_max > mu0 > 0")
        if self.max_epochs < 1:
            raise ValidationError("max_epochs must be >= 1")


class StopReason(str, enum.Enum):
    MAX_EPOCHS = "MaxEpochs"
    MU_CEILING = "MuCeiling"
    GRAD_TOL = "GradTol"
    VAL_FAILURES = "ValFailures"


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_sse: float
    val_mse: float
    mu: float
    accepted: bool


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    stop_reason: Optional[StopReason] = None
    best_epoch: int = 0

    @property
    def epochs(self) -> int:
        return self.records[-1].epoch if self.records else 0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_sse", "val_mse", "mu", "accepted"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.train_sse), repr(r.val_mse), repr(r.mu), int(r.accepted)])

    @classmethod
    def read_csv(cls, path) -> "TrainHistory":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(
            [
                EpochRecord(
                    int(r["epoch"]),
                    float(r["train_sse"]),
                    float(r["val_mse"]),
                    float(r["mu"]),
                    r["accepted"] == "1",
                )
                for r in rows
            ]
        )


@dataclass
class LeastSquaresProblem:
    """residuals(theta) -> r; jacobian(theta) -> (J, r); val_mse(theta) optional."""

    residuals: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    val_mse: Optional[Callable[[np.ndarray], float]] = None


def levenberg_marquardt(problem: LeastSquaresProblem, theta0, cfg: TrainConfig = TrainConfig()):
    """Classic LM: accept a step that lowers SSE and shrink mu, else grow mu and retry.

    Returns ``(theta_best, history)`` where theta_best has the lowest
    validation MSE seen (or is the last iterate when no validation is given).
    """
    theta = np.array(theta0, dtype=float)
    r = problem.residuals(theta)
    current = float(r @ r)
    val = problem.val_mse(theta) if problem.val_mse else np.nan
    mu = cfg.mu0
    history = TrainHistory([EpochRecord(0, current, val, mu, False)])
    best_theta, best_val, fails = theta.copy(), val, 0

    for epoch in range(1, cfg.max_epochs + 1):
        J, r = problem.jacobian(theta)
        g = J.T @ r
        if np.max(np.abs(g)) < cfg.grad_tol:
            history.stop_reason = StopReason.GRAD_TOL
            break
        JtJ = J.T @ J
        accepted = False
        while True:
            try:
                delta = damped_step_from_normal(JtJ, g, mu)
            except NotPositiveDefinite:
                delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                cand = theta + delta
                rc = problem.residuals(cand)
                cand_sse = float(rc @ rc)
                if cand_sse < current:
                    theta, current = cand, cand_sse
                    mu = max(mu * cfg.mu_dec, min(MU_FLOOR, mu))
                    accepted = True
                    break
            mu *= cfg.mu_inc
            if mu > cfg.mu_max:
                break

        if not accepted:
            history.records.append(EpochRecord(epoch, current, history.records[-1].val_mse, mu, False))
            history.stop_reason = StopReason.MU_CEILING
            break

        val = problem.val_mse(theta) if problem.val_mse else np.nan
        history.records.append(EpochRecord(epoch, current, val, mu, True))
        if problem.val_mse is None:
            best_theta, history.best_epoch = theta, epoch
        elif val < best_val:
            best_theta, best_val, history.best_epoch, fails = theta, val, epoch, 0
        else:
            fails += 1
            if fails >= cfg.max_val_fail:
                history.stop_reason = StopReason.VAL_FAILURES
                break
    else:
        history.stop_reason = StopReason.MAX_EPOCHS

    return best_theta, history


def _sse(model: NarxModel, ds: RegressorDataset) -> float:
    r = forward_open_loop(model, ds) - ds.targets
    return float(r @ r)


def lm_step(model: NarxModel, train: RegressorDataset, mu: float):
    """One damped Gauss-Newton step from `model`; returns (candidate, candidate_sse, current_sse)."""
    J, r = jacobian(model, train)
    delta = solve_damped_step(J, r, mu)
    candidate = model.with_params(model.params() + delta)
    return candidate, _sse(candidate, train), float(r @ r)


def narx_problem(model: NarxModel, train: RegressorDataset, val: RegressorDataset | None = None):
    def residuals(theta):
        return forward_open_loop(model.with_params(theta), train) - train.targets

    def jac(theta):
        return jacobian(model.with_params(theta), train)

    def val_mse(theta):
        e = forward_open_loop(model.with_params(theta), val) - val.targets
        return float(np.mean(e**2))

    return LeastSquaresProblem(residuals, jac, val_mse if val is not None else None)


def lm_fit(
    model: NarxModel,
    train: RegressorDataset,
    val: RegressorDataset,
    cfg: TrainConfig = TrainConfig(),
) -> tuple[NarxModel, TrainHistory]:
    """Train `model` open-loop on `train`; return the best-validation weights and history.

    Cost per epoch is O(N P^2) for assembling JᵀJ.
    """
    if len(train) == 0 or len(val) == 0:
        raise ValidationError("train and val sets must be nonempty")
    theta, history = levenberg_marquardt(narx_problem(model, train, val), model.params(), cfg)
    return model.with_params(theta), history
