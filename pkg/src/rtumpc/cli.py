"""Command-line entry point: ``rtumpc <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .models import ArxModel, Dataset, IcrnnModel, TrainConfig, evaluate_rmse, load_model, save_model
from .plant import RcNetwork, Trajectory, WeatherConfig, generate_dataset

log = logging.getLogger("rtumpc")


def _cmd_gen_data(args: argparse.Namespace) -> int:
    weather = WeatherConfig(mean=args.weather_mean, amplitude=args.weather_amplitude)
    traj = generate_dataset(RcNetwork(), months=args.months, seed=args.seed, weather=weather)
    traj.to_csv(args.out)
    log.info("wrote %d rows to %s", len(traj), args.out)
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    ds = Dataset(Trajectory.from_csv(args.data), seed=args.seed)
    if args.kind == "icrnn":
        cfg = TrainConfig(lr=args.lr, max_epochs=args.epochs, patience=args.patience,
                          n_hidden=args.hidden, seed=args.seed)
        model, hist = IcrnnModel.fit(ds, cfg)
        log.info("stopped after %d epochs, best epoch %d", len(hist.val_loss), hist.best_epoch)
    else:
        model = ArxModel.fit(ds)
    save_model(model, args.out)
    rep = evaluate_rmse(model, ds, "test")
    print(json.dumps({"kind": model.kind, "test_rmse": rep.mean.tolist()}))
    return 0


def _cmd_eval_model(args: argparse.Namespace) -> int:
    ds = Dataset(Trajectory.from_csv(args.data), seed=args.seed)
    model = load_model(args.model)
    rep = evaluate_rmse(model, ds, args.split, level=args.level)
    print(json.dumps(rep.to_json()))
    return 0


def _scenario(args: argparse.Namespace) -> harness.Scenario:
    sc = harness.Scenario.load(args.scenario) if args.scenario else harness.Scenario()
    overrides = {}
    for key in ("controller", "program", "model_path", "days", "solver_seed", "budget_evals", "budget_seconds"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "no_noise", False):
        overrides["noise"] = False
    return replace(sc, **overrides)


def _cmd_run(args: argparse.Namespace) -> int:
    sc = _scenario(args)
    result, bench = harness.run_with_benchmark(sc)
    out = Path(args.out)
    result.write(out)
    (out / "scenario.json").write_text(json.dumps(sc.to_json(), sort_keys=True, indent=2) + "\n")
    if bench is not None:
        bench.write(out / "benchmark")
    print(json.dumps(result.summary.to_json(), sort_keys=True))
    problems = harness.check_invariants(result, sc)
    for p in problems:
        log.error("invariant violated: %s", p)
    return 1 if problems else 0


def _cmd_budget_study(args: argparse.Namespace) -> int:
    sc = _scenario(args)
    study = harness.budget_study(sc, args.budgets, args.fraction, seed=args.seed)
    text = json.dumps(study.to_json(), sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(json.dumps({"identical_fraction": study.identical, "monotone": study.monotone}))
    return 0 if study.monotone else 1


COMPARE_COLUMNS = ("controller", "program", "avg_discomfort_c", "energy_kwh", "toggling", "net_cost",
                   "savings_pct")


def _cmd_compare(args: argparse.Namespace) -> int:
    rows = [json.loads(Path(p).read_text()) for p in args.summaries]
    print(",".join(COMPARE_COLUMNS))
    for r in rows:
        print(",".join("" if r.get(c) is None else str(r.get(c)) for c in COMPARE_COLUMNS))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rtumpc", description="Convex-model MPC for rooftop units.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="simulate the RC plant under excitation")
    g.add_argument("--months", type=float, default=6)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--weather-mean", type=float, default=WeatherConfig.mean)
    g.add_argument("--weather-amplitude", type=float, default=WeatherConfig.amplitude)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen_data)

    t = sub.add_parser("train", help="fit a thermal model")
    t.add_argument("kind", choices=["icrnn", "arx"])
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=TrainConfig.max_epochs)
    t.add_argument("--patience", type=int, default=TrainConfig.patience)
    t.add_argument("--hidden", type=int, default=TrainConfig.n_hidden)
    t.add_argument("--lr", type=float, default=TrainConfig.lr)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval-model", help="held-out multi-step RMSE")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", default="test", choices=["train", "val", "test"])
    e.add_argument("--level", default="dtheta", choices=["dtheta", "theta"])
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=_cmd_eval_model)

    for name, func, helptext in (("run", _cmd_run, "closed-loop run"),
                                 ("budget-study", _cmd_budget_study, "re-solve sampled rounds under larger budgets")):
        r = sub.add_parser(name, help=helptext)
        r.add_argument("--scenario", help="scenario JSON file")
        r.add_argument("--controller", choices=harness.CONTROLLERS)
        r.add_argument("--program", choices=harness.PROGRAMS)
        r.add_argument("--model", dest="model_path")
        r.add_argument("--days", type=int)
        r.add_argument("--solver-seed", type=int)
        r.add_argument("--budget-evals", type=int)
        r.add_argument("--budget-seconds", type=float)
        r.add_argument("--no-noise", action="store_true")
        r.set_defaults(func=func)
        if name == "run":
            r.add_argument("--out", default="results")
        else:
            r.add_argument("--budgets", type=int, nargs="+", default=[500, 1000, 3000])
            r.add_argument("--fraction", type=float, default=0.3)
            r.add_argument("--seed", type=int, default=0)
            r.add_argument("--out")

    c = sub.add_parser("compare", help="tabulate summary.json files")
    c.add_argument("summaries", nargs="+")
    c.set_defaults(func=_cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
