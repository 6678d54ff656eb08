"""Delay sweep on the synthetic cycles, optionally with a noisy logged SOC reference.

    python3 scripts/run_delay_sweep.py --delays 2,20,50,100 --seeds 5 --workers 4
"""
import argparse
import time
from pathlib import Path

from narxsoc.experiments import ExperimentSpec, run_delay_sweep
from narxsoc.lm import TrainConfig
from narxsoc.scenarios import TREND_SOC_SIGMA, delay_trend_train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--delays", default="2,50")
    ap.add_argument("--hidden", default="4")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--soc-sigma", type=float, default=TREND_SOC_SIGMA)
    ap.add_argument("--max-epochs", type=int, default=1000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/delay_sweep.csv")
    args = ap.parse_args()

    spec = ExperimentSpec(
        delay_trend_train(args.soc_sigma),
        delays=[int(d) for d in args.delays.split(",")],
        hidden=[int(h) for h in args.hidden.split(",")],
        seeds=list(range(args.seeds)),
        train_config=TrainConfig(max_epochs=args.max_epochs),
        workers=args.workers,
    )
    t0 = time.perf_counter()
    result = run_delay_sweep(spec)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    result.write(args.out)
    for s in result.summary:
        print(f"H={s['hidden']} d={s['delay']:4d}  median test MSE {s['median_test_mse']:.4e}  ({s['n_ok']} ok)")
    print(f"ordering: {result.ordering}   {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
