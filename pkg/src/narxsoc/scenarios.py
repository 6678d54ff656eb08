"""Canned synthetic scenarios shared by the scripts and the acceptance suite."""
from __future__ import annotations

from .experiments import load_cycle

# two urban + one highway cycle, ~1e4 regressor rows in total
TRAIN_SOURCES = (
    "sim:urban:3600:1:0.95",
    "sim:urban:3600:2:0.70",
    "sim:highway:3000:3:0.90",
)
# held-out aggressive cycle whose SOC range sits inside the training range
TEST_SOURCES = ("sim:aggressive:1800:4:0.80",)
# one cycle per style, used for per-cycle tables
EVAL_SOURCES = (
    "sim:urban:1800:21:0.85",
    "sim:highway:1800:22:0.85",
    "sim:aggressive:1800:23:0.85",
)


def synthetic_train():
    return [load_cycle(s) for s in TRAIN_SOURCES]


def synthetic_test():
    return [load_cycle(s) for s in TEST_SOURCES]


def synthetic_eval():
    return [load_cycle(s) for s in EVAL_SOURCES]


# reference-SOC noise comparable to the label error of a lab SOC log; with
# noiseless labels the I(t) floor dominates and delay length stops mattering
TREND_SOC_SIGMA = 0.005


def delay_trend_train(soc_sigma: float = TREND_SOC_SIGMA):
    """Training cycles of TRAIN_SOURCES with a noisy logged SOC reference."""
    from .ecm import CellParams, NoiseSpec, generate_profile, simulate_cycle

    cycles = []
    for src in TRAIN_SOURCES:
        _, style, dur, seed, soc0 = src.split(":")
        prof = generate_profile(style, int(dur), int(seed))
        noise = NoiseSpec(seed=int(seed), soc_sigma=soc_sigma)
        cycles.append(simulate_cycle(CellParams(), prof, noise, float(soc0), f"{style}-{seed}"))
    return cycles
