"""Reproduce the 25 degC Panasonic 18650PF tables from CSV exports of the dataset.

Expects DIR/train/*.csv (mixed training cycles) and DIR/test/{HWFET,LA92,UDDS,US06}.csv,
each with time_s, voltage_v, current_a, temperature_c and either soc or ah columns.

    python3 scripts/run_panasonic_tables.py DIR --out results/panasonic
"""
import argparse
from pathlib import Path

from narxsoc.experiments import ExperimentSpec, load_cycles, run_delay_sweep, run_drive_cycle_eval, train_narx
from narxsoc.narx import save_model

CYCLES = ("HWFET", "LA92", "UDDS", "US06")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("root")
    ap.add_argument("--delays", default="2,20,50,100")
    ap.add_argument("--seeds", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/panasonic")
    args = ap.parse_args()
    root, out = Path(args.root), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = load_cycles(sorted(str(p) for p in (root / "train").glob("*.csv")))
    tests = load_cycles([str(root / "test" / f"{c}.csv") for c in CYCLES])

    # delay sweep, hidden 4, metrics on the test split
    delays = [int(d) for d in args.delays.split(",")]
    spec = ExperimentSpec(train, delays=delays, hidden=[4], seeds=list(range(args.seeds)),
                          workers=args.workers, out_dir=out / "models")
    sweep = run_delay_sweep(spec)
    sweep.write(out / "table_delays.csv")

    # per-cycle errors of the two longest-memory models, both loop modes
    models = []
    for d in sorted(delays)[-2:]:
        m = train_narx(train, 4, d, seed=0).model
        save_model(m, out / f"{m.model_id}.json")
        models.append(m)
    for mode in ("open", "closed"):
        run_drive_cycle_eval(models, tests, mode).write(out / f"table_cycles_{mode}.csv")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
