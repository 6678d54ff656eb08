"""First-order Thevenin cell simulator producing synthetic drive-cycle logs.

The cell is an OCV source, a series resistance and one RC polarization pair,
with a lumped first-order thermal model. Sampling defaults to 1 Hz.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import NOMINAL_CAPACITY_AH, DriveCycleLog
from .errors import ValidationError


@dataclass(frozen=True)
class CellParams:
    capacity_ah: float = NOMINAL_CAPACITY_AH
    r0: float = 0.03
    r1: float = 0.015
    c1: float = 2000.0
    # ascending powers of soc: 3.2 + 0.7 s + 0.3 s^2
    ocv_coeffs: tuple[float, ...] = (3.2, 0.7, 0.3)
    v_min: float = 2.5
    v_max: float = 4.2
    thermal_resistance: float = 5.0
    thermal_tau: float = 300.0
    ambient_c: float = 25.0

    def __post_init__(self):
        if self.capacity_ah <= 0:
            raise ValidationError("capacity_ah must be positive")
        if self.r0 < 0 or self.r1 < 0 or self.c1 <= 0:
            raise ValidationError("need r0, r1 >= 0 and c1 > 0")
        if not self.v_min < self.v_max:
            raise ValidationError("v_min must be below v_max")
        grid = np.polynomial.polynomial.polyval(np.linspace(0, 1, 1001), self.ocv_coeffs)
        if np.any(np.diff(grid) < 0):
            raise ValidationError("OCV polynomial must be nondecreasing on [0, 1]")

    @property
    def tau(self) -> float:
        return self.r1 * self.c1


@dataclass(frozen=True)
class CellState:
    soc: float
    v1: float = 0.0
    temperature_c: float = 25.0


@dataclass(frozen=True)
class NoiseSpec:
    current_sigma_a: float = 0.025
    voltage_sigma_v: float = 0.002
    temperature_sigma_c: float = 0.1
    seed: int = 0
    # noise on the logged SOC reference; the cell state itself stays exact
    soc_sigma: float = 0.0

    def __post_init__(self):
        if min(self.current_sigma_a, self.voltage_sigma_v, self.temperature_sigma_c, self.soc_sigma) < 0:
            raise ValidationError("noise sigmas must be non-negative")


NOISELESS = NoiseSpec(0.0, 0.0, 0.0)


def ocv(params: CellParams, soc):
    return np.polynomial.polynomial.polyval(soc, params.ocv_coeffs)


def terminal_voltage(params: CellParams, state: CellState, current: float) -> float:
    return float(ocv(params, state.soc) - current * params.r0 - state.v1)


def step_cell(params: CellParams, state: CellState, current: float, dt: float):
    """Advance the cell by `dt` seconds at constant `current`.

    Returns ``(new_state, terminal_voltage, clamped)``; `clamped` is True
    when SOC had to be clipped into [0, 1].
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    soc = state.soc - current * dt / (3600.0 * params.capacity_ah)
    clamped = not 0.0 <= soc <= 1.0
    soc = min(max(soc, 0.0), 1.0)
    if params.r1 > 0:
        decay = np.exp(-dt / params.tau)
        v1 = state.v1 * decay + current * params.r1 * (1.0 - decay)
    else:
        v1 = 0.0
    target = params.ambient_c + params.thermal_resistance * current**2 * (params.r0 + params.r1)
    temp = target + (state.temperature_c - target) * np.exp(-dt / params.thermal_tau)
    new = CellState(float(soc), float(v1), float(temp))
    return new, terminal_voltage(params, new, current), clamped


# style -> (regen probability, discharge mean, discharge peak)
PROFILE_STYLES = {
    "urban": (0.30, 1.0, 2.9),
    "highway": (0.05, 2.0, 5.8),
    "aggressive": (0.15, 2.5, 8.7),
}
MIN_DISCHARGE_A = 0.8
MAX_REGEN_A = 1.5


def generate_profile(style: str, duration_s: int, seed: int) -> np.ndarray:
    """Piecewise-constant 1 Hz current profile (discharge-positive).

    Segments last 1..20 s. A segment is regenerative with the style's
    probability, drawing from [-1.5, 0) A; otherwise its amplitude is
    0.8 A plus an exponential excess sized so the mean matches the style,
    capped at the style's peak.
    """
    if style not in PROFILE_STYLES:
        raise ValidationError(f"unknown profile style {style!r}")
    duration_s = int(duration_s)
    if duration_s < 10:
        raise ValidationError("duration_s must be at least 10")
    p_regen, mean, peak = PROFILE_STYLES[style]
    rng = np.random.default_rng(seed)
    out = np.empty(duration_s)
    pos = 0
    while pos < duration_s:
        length = int(rng.integers(1, 21))
        if rng.random() < p_regen:
            amp = -MAX_REGEN_A * (1.0 - rng.random())
        else:
            amp = min(MIN_DISCHARGE_A + rng.exponential(mean - MIN_DISCHARGE_A), peak)
        out[pos : pos + length] = amp
        pos += length
    return out


def simulate_cycle(
    params: CellParams,
    profile: np.ndarray,
    noise: NoiseSpec = NoiseSpec(),
    soc0: float = 1.0,
    cycle_id: str = "sim",
    dt: float = 1.0,
) -> DriveCycleLog:
    """Run the cell over a sampled current profile and log noisy V, I, T.

    Current is taken as linear between samples, so each step uses the mean
    of its two endpoint currents and the logged SOC is exactly the
    trapezoidal charge balance of the noiseless profile. The run stops
    before the first sample whose terminal voltage drops below ``v_min`` or
    whose SOC would leave [0, 1].
    """
    if not 0.0 < soc0 <= 1.0:
        raise ValidationError("soc0 must lie in (0, 1]")
    profile = np.asarray(profile, dtype=float)
    state = CellState(soc0, 0.0, params.ambient_c)
    socs = [soc0]
    volts = [terminal_voltage(params, state, profile[0])]
    temps = [state.temperature_c]
    for k in range(1, len(profile)):
        i_mid = 0.5 * (profile[k - 1] + profile[k])
        new, _, clamped = step_cell(params, state, i_mid, dt)
        v = terminal_voltage(params, new, profile[k])
        if clamped or v < params.v_min:
            break
        state = new
        socs.append(state.soc)
        volts.append(v)
        temps.append(state.temperature_c)
    n = len(socs)
    rng = np.random.default_rng(noise.seed)
    current = profile[:n] + rng.normal(0.0, noise.current_sigma_a, n)
    voltage = np.asarray(volts) + rng.normal(0.0, noise.voltage_sigma_v, n)
    temperature = np.asarray(temps) + rng.normal(0.0, noise.temperature_sigma_c, n)
    soc = np.asarray(socs)
    if noise.soc_sigma > 0:
        soc = np.clip(soc + rng.normal(0.0, noise.soc_sigma, n), 0.0, 1.0)
    return DriveCycleLog(cycle_id, np.arange(n) * dt, voltage, current, temperature, soc)
