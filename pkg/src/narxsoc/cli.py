"""Command-line entry point: ``narxsoc {simulate,train,eval,sweep,baseline}``.

Exit codes: 0 success, 1 validation error, 2 runtime failure. Options can
also come from a ``key = value`` file given with ``--config``; explicit flags
win over the file, which wins over built-in defaults.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .data import NOMINAL_CAPACITY_AH, write_cycle_csv
from .ecm import CellParams, NoiseSpec, generate_profile, simulate_cycle
from .errors import NarxSocError, ValidationError
from .experiments import (
    BASELINE_METHODS,
    ExperimentSpec,
    export_trace,
    load_cycles,
    predict_cycle,
    run_baseline_compare,
    run_delay_sweep,
    run_drive_cycle_eval,
    train_narx,
    write_rows,
)
from .lm import TrainConfig
from .narx import load_model, save_model

log = logging.getLogger("narxsoc")

REQUIRED = {
    "simulate": ("profile", "duration_s", "out"),
    "train": ("data", "hidden", "delays", "out"),
    "eval": ("model", "data", "report"),
    "sweep": ("data", "delays", "out"),
    "baseline": ("train", "test", "out"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _csv_list(text: str) -> list[str]:
    return [s.strip() for s in str(text).split(",") if s.strip()]


def _int_list(text) -> list[int]:
    return [int(v) for v in _csv_list(text)]


def _fractions(text) -> tuple[float, float, float]:
    vals = tuple(float(v) for v in _csv_list(text))
    if len(vals) != 3:
        raise ValidationError("--fractions needs three comma-separated values")
    return vals


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment. Keys map to flag names."""
    cfg = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.lstrip("-").replace("-", "_")] = value
    return cfg


def _train_config_args(p):
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--max-val-fail", type=int, default=6)
    p.add_argument("--mu0", type=float, default=1e-3)


def _data_args(p):
    p.add_argument("--capacity-ah", type=float, default=NOMINAL_CAPACITY_AH)
    p.add_argument("--soc0", type=float, default=1.0,
                   help="initial SOC for CSVs without a soc column")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="narxsoc", description="NARX state-of-charge estimation toolkit")
    parser.add_argument("--config", help="key = value defaults file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a synthetic drive cycle to CSV")
    p.add_argument("--profile", choices=("urban", "highway", "aggressive"))
    p.add_argument("--duration-s", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--soc0", type=float, default=1.0)
    p.add_argument("--out")

    p = sub.add_parser("train", help="train a NARX model open-loop with LM")
    p.add_argument("--data", type=_csv_list)
    p.add_argument("--hidden", type=int)
    p.add_argument("--delays", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=("random", "block"), default="random")
    p.add_argument("--fractions", type=_fractions, default=(0.70, 0.15, 0.15))
    p.add_argument("--out")
    p.add_argument("--history")
    _train_config_args(p)
    _data_args(p)

    p = sub.add_parser("eval", help="evaluate a model on one drive cycle")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--mode", choices=("open", "closed"), default="open")
    p.add_argument("--report")
    p.add_argument("--trace")
    p.add_argument("--clamp-feedback", action="store_true", help="clamp closed-loop feedback to [-1, 1]")
    _data_args(p)

    p = sub.add_parser("sweep", help="train over hidden x delay x seed")
    p.add_argument("--data", type=_csv_list)
    p.add_argument("--hidden", type=_int_list, default=[4])
    p.add_argument("--delays", type=_int_list)
    p.add_argument("--seeds", type=int, default=1, help="number of seeds, 0..N-1")
    p.add_argument("--split", choices=("random", "block"), default="random")
    p.add_argument("--fractions", type=_fractions, default=(0.70, 0.15, 0.15))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--models-dir")
    p.add_argument("--out")
    _train_config_args(p)
    _data_args(p)

    p = sub.add_parser("baseline", help="compare memoryless baselines with NARX models")
    p.add_argument("--train", type=_csv_list)
    p.add_argument("--test", type=_csv_list)
    p.add_argument("--methods", type=_csv_list, default=list(BASELINE_METHODS))
    p.add_argument("--narx", type=_csv_list, default=[])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-train-rows", type=int, default=2000)
    p.add_argument("--out")
    _data_args(p)
    return parser


def _flag(text: str) -> bool:
    t = text.strip().lower()
    if t not in ("true", "false", "1", "0", "yes", "no"):
        raise ValidationError(f"not a boolean: {text!r}")
    return t in ("true", "1", "yes")


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = read_config(known.config)
        # subparser defaults are the lowest layer, so config values slot in below flags
        for action in parser._subparsers._group_actions:
            for name, sp in action.choices.items():
                dests = {a.dest: a for a in sp._actions}
                values = {}
                for k, v in cfg.items():
                    if k in dests:
                        a = dests[k]
                        if isinstance(a, argparse._StoreTrueAction):
                            values[k] = _flag(v)
                        else:
                            values[k] = a.type(v) if a.type else v
                sp.set_defaults(**values)
    args = parser.parse_args(argv)
    missing = [k for k in REQUIRED[args.command] if getattr(args, k, None) in (None, [])]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise ValidationError(f"{args.command}: missing required option(s) {flags}")
    return args


def _train_cfg(args, seed=0) -> TrainConfig:
    return TrainConfig(mu0=args.mu0, max_epochs=args.max_epochs, max_val_fail=args.max_val_fail, seed=seed)


def cmd_simulate(args):
    log_ = simulate_cycle(
        CellParams(),
        generate_profile(args.profile, args.duration_s, args.seed),
        NoiseSpec(seed=args.seed),
        args.soc0,
        cycle_id=f"{args.profile}-{args.seed}",
    )
    write_cycle_csv(log_, args.out)
    print(f"wrote {len(log_)} samples to {args.out}")


def cmd_train(args):
    cycles = load_cycles(args.data, capacity_ah=args.capacity_ah, soc0=args.soc0)
    res = train_narx(cycles, args.hidden, args.delays, args.seed, args.split, args.fractions,
                     _train_cfg(args, args.seed))
    save_model(res.model, args.out)
    if args.history:
        res.history.write_csv(args.history)
    print(f"stop: {res.history.stop_reason.value} after {res.history.epochs} epochs "
          f"(best epoch {res.history.best_epoch})")
    for name, mse in res.split_mse.items():
        print(f"{name:5s} MSE {mse:.6e}")


def cmd_eval(args):
    model = load_model(args.model)
    cycle = load_cycles([args.data], capacity_ah=args.capacity_ah, soc0=args.soc0)[0]
    result = run_drive_cycle_eval([model], [cycle], args.mode, [Path(args.model).stem], args.clamp_feedback)
    result.write(args.report)
    row = result.rows[0]
    if row["status"] != "ok":
        raise ValidationError(row["status"])
    if args.trace:
        t, actual, pred = predict_cycle(model, cycle, args.mode, args.clamp_feedback)
        export_trace(t, actual, pred, args.trace)
    print(f"{row['cycle_id']} {args.mode}-loop MSE {row['mse']:.6e} RMSE {row['rmse']:.6e}")


def cmd_sweep(args):
    cycles = load_cycles(args.data, capacity_ah=args.capacity_ah, soc0=args.soc0)
    spec = ExperimentSpec(
        cycles=cycles,
        delays=args.delays,
        hidden=args.hidden,
        seeds=list(range(args.seeds)),
        split_mode=args.split,
        fractions=args.fractions,
        train_config=_train_cfg(args),
        out_dir=Path(args.models_dir) if args.models_dir else None,
        workers=args.workers,
    )
    result = run_delay_sweep(spec)
    result.write(args.out)
    for s in result.summary:
        print(f"H={s['hidden']} d={s['delay']}: median test MSE {s['median_test_mse']:.6e} ({s['n_ok']} ok)")
    print("ordering:", result.ordering)


def cmd_baseline(args):
    kw = dict(capacity_ah=args.capacity_ah, soc0=args.soc0)
    models = [load_model(p) for p in args.narx]
    rows = run_baseline_compare(
        load_cycles(args.train, **kw),
        load_cycles(args.test, **kw),
        args.methods,
        models,
        seed=args.seed,
        max_train_rows=args.max_train_rows,
        narx_ids=[f"narx-{Path(p).stem}" for p in args.narx],
    )
    from .experiments import BASELINE_COLUMNS

    write_rows(args.out, rows, BASELINE_COLUMNS)
    for r in rows:
        if r["status"] == "ok":
            print(f"{r['method']:>16s}  RMSE {r['rmse_pct']:.4f} %  MSE {r['mse']:.6e}  R2 {r['r2']:.4f}")
        else:
            print(f"{r['method']:>16s}  {r['status']}")


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "baseline": cmd_baseline,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NarxSocError, ArithmeticError, OSError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
