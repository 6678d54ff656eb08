"""Synthetic end-to-end run: train one NARX on simulated cycles, score it open and
closed loop on held-out cycles, and compare with the instantaneous baselines.

    python3 scripts/run_synthetic.py --out results/synthetic
"""
import argparse
import time
from pathlib import Path

from narxsoc.experiments import (
    BASELINE_COLUMNS,
    export_trace,
    predict_cycle,
    run_baseline_compare,
    run_drive_cycle_eval,
    train_narx,
    write_rows,
)
from narxsoc.narx import save_model
from narxsoc.scenarios import synthetic_eval, synthetic_test, synthetic_train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/synthetic")
    ap.add_argument("--hidden", type=int, default=4)
    ap.add_argument("--delays", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-baselines", action="store_true")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    train, test = synthetic_train(), synthetic_test()
    res = train_narx(train, args.hidden, args.delays, seed=args.seed)
    save_model(res.model, out / f"{res.model.model_id}.json")
    res.history.write_csv(out / "history.csv")
    print(f"trained {res.model.model_id}: {res.history.epochs} epochs ({res.history.stop_reason}), "
          f"test MSE {res.split_mse['test']:.3e}, {time.perf_counter() - t0:.1f} s")

    cycles = test + synthetic_eval()
    for mode in ("open", "closed"):
        ev = run_drive_cycle_eval([res.model], cycles, mode)
        ev.write(out / f"eval_{mode}.csv")
        for r in ev.rows:
            print(f"  {mode:6s} {r['cycle_id']:16s} MSE {r['mse']:.3e}  RMSE {100 * r['rmse']:.3f} %SOC")
    for mode in ("open", "closed"):
        export_trace(*predict_cycle(res.model, test[0], mode), out / f"trace_{test[0].cycle_id}_{mode}.csv")

    if not args.skip_baselines:
        rows = run_baseline_compare(train, test, narx_models=[res.model], seed=args.seed)
        write_rows(out / "baselines.csv", rows, BASELINE_COLUMNS)
        for r in rows:
            print(f"  {r['method']:14s} MSE {r['mse']:.3e}  {r['status']}")


if __name__ == "__main__":
    main()
