"""Error metrics on SOC fractions."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptySeries, LengthMismatch


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    rmse: float
    mae: float
    r2: float  # nan when undefined (constant actual series, nonzero error)
    mse_pct: float
    sample_count: int
    model_id: str = ""
    cycle_id: str = ""
    loop_mode: str = "open"

    def as_row(self) -> dict:
        return asdict(self)


def compute_metrics(predicted, actual, model_id="", cycle_id="", loop_mode="open") -> MetricsReport:
    p = np.asarray(predicted, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if p.shape != a.shape:
        raise LengthMismatch(f"{p.size} predictions vs {a.size} actual values")
    if p.size == 0:
        raise EmptySeries("cannot score an empty series")
    err = p - a
    sse = float(err @ err)
    mse = sse / p.size
    dev = a - a.mean()
    sst = float(dev @ dev)
    if sst > 0:
        r2 = 1.0 - sse / sst
    else:
        r2 = 1.0 if sse == 0 else math.nan
    return MetricsReport(
        mse=mse,
        rmse=math.sqrt(mse),
        mae=float(np.mean(np.abs(err))),
        r2=r2,
        mse_pct=mse * 1e4,
        sample_count=int(p.size),
        model_id=model_id,
        cycle_id=cycle_id,
        loop_mode=loop_mode,
    )
