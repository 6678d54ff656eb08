"""Drive-cycle logs, coulomb counting, normalization and tapped-delay regressors."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptySplit,
    InsufficientHistory,
    MalformedNumber,
    MissingColumn,
    NonMonotonicTime,
    ValidationError,
)

NOMINAL_CAPACITY_AH = 2.9
CHANNELS = ("voltage", "current", "temperature", "soc")
# Delay taps t-1 .. t-d; lag 0 is deliberately excluded from the regressor.
FIRST_LAG = 1
# Bounds within this distance snap to [0, 1] without counting a clamp event.
_CLAMP_SLACK = 1e-9

CSV_COLUMNS = ("time_s", "voltage_v", "current_a", "temperature_c")


@dataclass(frozen=True)
class DriveCycleLog:
    """One contiguous drive cycle sampled at native rate.

    Current is discharge-positive. ``soc`` is None until computed.
    """

    cycle_id: str
    time: np.ndarray
    voltage: np.ndarray
    current: np.ndarray
    temperature: np.ndarray
    soc: np.ndarray | None = None
    soc_clamp_events: int = 0

    def __post_init__(self):
        arrays = {}
        for name in ("time", "voltage", "current", "temperature", "soc"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.asarray(value, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            arrays[name] = arr
        n = len(self.time)
        if n < 2:
            raise ValidationError(f"cycle {self.cycle_id!r} needs at least 2 samples")
        for name, arr in arrays.items():
            if arr.shape != (n,):
                raise ValidationError(f"{name} has shape {arr.shape}, expected ({n},)")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values")
        bad = np.flatnonzero(np.diff(self.time) <= 0)
        if bad.size:
            raise NonMonotonicTime(int(bad[0]) + 1)
        if np.any(self.voltage <= 0) or np.any(self.voltage >= 10):
            raise ValidationError("voltage outside (0, 10) V")
        if np.any(np.abs(self.current) >= 100):
            raise ValidationError("|current| must be below 100 A")

    def __len__(self):
        return len(self.time)

    @property
    def has_soc(self) -> bool:
        return self.soc is not None

    def channel(self, name: str) -> np.ndarray:
        arr = getattr(self, name)
        if arr is None:
            raise ValidationError(f"cycle {self.cycle_id!r} has no {name} values")
        return arr


def _float(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedNumber(f"line {line}, column {column!r}: {text!r}") from None
    if not math.isfinite(value):
        raise MalformedNumber(f"line {line}, column {column!r}: {text!r}")
    return value


def parse_cycle_csv(
    content: bytes | str,
    cycle_id: str,
    capacity_ah: float = NOMINAL_CAPACITY_AH,
    soc0: float = 1.0,
) -> DriveCycleLog:
    """Parse a drive-cycle CSV.

    Columns are found by header name: ``time_s, voltage_v, current_a,
    temperature_c`` plus an optional ``soc`` (fraction) or ``ah`` (amp-hours
    discharged, converted as ``soc0 - ah / capacity_ah``). A ``soc`` column
    wins over ``ah``. Extra columns are ignored.
    """
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    reader = csv.reader(io.StringIO(content, newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ValidationError("empty file") from None
    index = {name: i for i, name in enumerate(header)}
    for name in CSV_COLUMNS:
        if name not in index:
            raise MissingColumn(name)
    soc_col = "soc" if "soc" in index else ("ah" if "ah" in index else None)
    wanted = list(CSV_COLUMNS) + ([soc_col] if soc_col else [])

    rows = []
    prev_time = -math.inf
    for line_no, record in enumerate(reader, start=2):
        if not record or all(not cell.strip() for cell in record):
            continue
        values = []
        for name in wanted:
            i = index[name]
            if i >= len(record):
                raise MalformedNumber(f"line {line_no}: missing value for {name!r}")
            values.append(_float(record[i].strip(), line_no, name))
        if values[0] <= prev_time:
            raise NonMonotonicTime(line_no)
        prev_time = values[0]
        rows.append(values)
    if len(rows) < 2:
        raise ValidationError(f"cycle {cycle_id!r} needs at least 2 samples")

    table = np.array(rows)
    soc = None
    if soc_col == "soc":
        soc = table[:, 4]
    elif soc_col == "ah":
        soc = soc0 - table[:, 4] / capacity_ah
    return DriveCycleLog(cycle_id, table[:, 0], table[:, 1], table[:, 2], table[:, 3], soc)


def read_cycle_csv(path, cycle_id: str | None = None, **kwargs) -> DriveCycleLog:
    from pathlib import Path

    path = Path(path)
    return parse_cycle_csv(path.read_bytes(), cycle_id or path.stem, **kwargs)


def write_cycle_csv(log: DriveCycleLog, path) -> None:
    """Write `log` in the drive-cycle CSV format (``soc`` column when populated)."""
    header = list(CSV_COLUMNS) + (["soc"] if log.has_soc else [])
    columns = [log.time, log.voltage, log.current, log.temperature]
    if log.has_soc:
        columns.append(log.soc)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])


def compensated_cumsum(values: np.ndarray) -> np.ndarray:
    """Running sums with Neumaier compensation (each partial sum is near correctly rounded)."""
    out = np.empty(len(values))
    total = comp = 0.0
    for i, v in enumerate(values.tolist()):
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
        out[i] = total + comp
    return out


def coulomb_count(
    log: DriveCycleLog, capacity_ah: float = NOMINAL_CAPACITY_AH, soc0: float = 1.0
) -> DriveCycleLog:
    """Populate SOC by trapezoidal integration of the (discharge-positive) current."""
    if capacity_ah <= 0:
        raise ValidationError("capacity_ah must be positive")
    if not 0.0 <= soc0 <= 1.0:
        raise ValidationError("soc0 must lie in [0, 1]")
    dt = np.diff(log.time)
    charge = 0.5 * (log.current[1:] + log.current[:-1]) * dt
    soc = np.empty(len(log))
    soc[0] = soc0
    soc[1:] = soc0 - compensated_cumsum(charge) / (3600.0 * capacity_ah)
    events = int(np.count_nonzero((soc < -_CLAMP_SLACK) | (soc > 1.0 + _CLAMP_SLACK)))
    return replace(log, soc=np.clip(soc, 0.0, 1.0), soc_clamp_events=events)


@dataclass(frozen=True)
class Normalizer:
    """Per-channel min/max mapping values affinely onto [-1, +1]."""

    ranges: dict[str, tuple[float, float]]

    @property
    def degenerate(self) -> tuple[str, ...]:
        return tuple(c for c, (lo, hi) in self.ranges.items() if not hi > lo)

    def normalize(self, channel: str, v):
        lo, hi = self.ranges[channel]
        v = np.asarray(v, dtype=float)
        if not hi > lo:
            return np.zeros_like(v)[()]
        return (2.0 * (v - lo) / (hi - lo) - 1.0)[()]

    def denormalize(self, channel: str, z):
        lo, hi = self.ranges[channel]
        z = np.asarray(z, dtype=float)
        if not hi > lo:
            return np.full_like(z, lo)[()]
        return ((z + 1.0) * 0.5 * (hi - lo) + lo)[()]

    def to_dict(self) -> dict:
        return {c: [lo, hi] for c, (lo, hi) in self.ranges.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls({c: (float(v[0]), float(v[1])) for c, v in d.items()})


def normalize_value(n: Normalizer, channel: str, v):
    return n.normalize(channel, v)


def denormalize_value(n: Normalizer, channel: str, z):
    return n.denormalize(channel, z)


def fit_normalizer(logs: Sequence[DriveCycleLog]) -> Normalizer:
    """Min/max over the union of all samples; constant channels end up in ``degenerate``."""
    if not logs:
        raise ValidationError("need at least one log")
    ranges = {}
    for c in CHANNELS:
        values = np.concatenate([log.channel(c) for log in logs])
        ranges[c] = (float(values.min()), float(values.max()))
    return Normalizer(ranges)


@dataclass(frozen=True)
class RegressorDataset:
    """Tapped-delay rows: features ``[V lags, I lags, T lags, SOC lags]``, lag 1 first."""

    delay_count: int
    features: np.ndarray
    targets: np.ndarray
    source_cycle: np.ndarray
    time: np.ndarray

    def __len__(self):
        return len(self.targets)

    def subset(self, idx) -> "RegressorDataset":
        return RegressorDataset(
            self.delay_count,
            self.features[idx],
            self.targets[idx],
            self.source_cycle[idx],
            self.time[idx],
        )


def lag_matrix(series: np.ndarray, d: int) -> np.ndarray:
    """Rows t = d..N-1 of ``[series[t-1], ..., series[t-d]]``."""
    n = len(series)
    cols = [series[d - lag : n - lag] for lag in range(FIRST_LAG, FIRST_LAG + d)]
    return np.stack(cols, axis=1)


def normalized_channels(log: DriveCycleLog, n: Normalizer) -> np.ndarray:
    """(N, 4) array of normalized V, I, T, SOC."""
    return np.stack([n.normalize(c, log.channel(c)) for c in CHANNELS], axis=1)


def build_regressors(
    logs: Iterable[DriveCycleLog], d: int, n: Normalizer
) -> RegressorDataset:
    """Build rows for every t in d..len-1 of every log; windows never cross logs."""
    if d < 1:
        raise ValidationError("delay count must be >= 1")
    feats, targets, sources, times = [], [], [], []
    for log in logs:
        if len(log) <= d:
            raise InsufficientHistory(log.cycle_id, len(log), d)
        z = normalized_channels(log, n)
        feats.append(np.hstack([lag_matrix(z[:, k], d) for k in range(4)]))
        targets.append(z[d:, 3])
        sources.append(np.full(len(log) - d, log.cycle_id, dtype=object))
        times.append(log.time[d:])
    if not feats:
        raise ValidationError("no logs given")
    return RegressorDataset(
        d,
        np.vstack(feats),
        np.concatenate(targets),
        np.concatenate(sources),
        np.concatenate(times),
    )


def _split_sizes(n: int, fractions) -> tuple[int, int, int]:
    val = int(math.floor(n * fractions[1] + 1e-9))
    test = int(math.floor(n * fractions[2] + 1e-9))
    return n - val - test, val, test


def split_dataset(
    ds: RegressorDataset,
    fractions=(0.70, 0.15, 0.15),
    seed: int = 0,
    mode: str = "random",
) -> tuple[RegressorDataset, RegressorDataset, RegressorDataset]:
    """Partition rows into train/val/test.

    ``random`` shuffles rows with a seeded generator; ``block`` cuts each
    cycle's rows in time order into consecutive train, val, test slices.
    Within each part rows keep their original order.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or min(fractions) <= 0 or abs(sum(fractions) - 1) > 1e-9:
        raise ValidationError(f"bad split fractions {fractions}")
    parts: list[list[np.ndarray]] = [[], [], []]
    if mode == "random":
        n_train, n_val, _ = _split_sizes(len(ds), fractions)
        perm = np.random.default_rng(seed).permutation(len(ds))
        cuts = (perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :])
        for i, c in enumerate(cuts):
            parts[i].append(c)
    elif mode in ("block", "contiguous-blocks"):
        _, first = np.unique(ds.source_cycle, return_index=True)
        for start in np.sort(first):
            cid = ds.source_cycle[start]
            idx = np.flatnonzero(ds.source_cycle == cid)
            n_train, n_val, _ = _split_sizes(len(idx), fractions)
            parts[0].append(idx[:n_train])
            parts[1].append(idx[n_train : n_train + n_val])
            parts[2].append(idx[n_train + n_val :])
    else:
        raise ValidationError(f"unknown split mode {mode!r}")
    out = []
    for name, chunks in zip(("train", "val", "test"), parts):
        idx = np.sort(np.concatenate(chunks))
        if idx.size == 0:
            raise EmptySplit(f"{name} partition would be empty")
        out.append(ds.subset(idx))
    return tuple(out)
