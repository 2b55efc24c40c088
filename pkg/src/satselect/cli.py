"""Command line entry point: ``satselect <command> [options]``.

Commands
--------
preprocess      clean a feature/runtime pair into a learning-ready dataset
cv              k-fold cross-validated forest metrics
curve           active vs passive learning curves
extract         structural features of DIMACS CNF files
synth           synthetic clustered dataset
impute-report   constant-feature screening + imputation report for a feature CSV

A dataset directory holds ``features.csv`` and ``runtimes.csv`` (as written
by ``preprocess`` and ``synth``). Settings resolve as command-line flag >
``--config`` JSON file > built-in default, and the resolved settings are
written to ``config.json`` next to every output. All randomness derives from
``--seed``.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .active import ActiveConfig, QueryStrategy
from .data import (PRESETS, FeatureMatrix, LabeledDataset, Portfolio, join, load_features,
                   load_runtimes, slice_portfolio, write_features, write_runtimes, write_table)
from .evaluation import curve_csv, kfold_cv, learning_curve, synthetic_dataset
from .exceptions import ParseError, ValidationError
from .features import FEATURE_NAMES, FEATURE_VERSION, extract_features, read_dimacs
from .forest import ForestConfig
from .preprocess import (PreprocessReport, drop_constant_features, drop_trivial_instances,
                         prepare_features, preprocess)
from .seeding import child_seed

log = logging.getLogger("satselect")

DEFAULTS = {
    "seed": 0,
    "portfolio": None,          # None: every solver in the runtime file
    "cutoff": 1200.0,
    "strategy": "margin",
    "strategies": "margin,maxunc,entropy,passive",
    "trees": 99,
    "feature_subset_size": None,
    "bootstrap": True,
    "min_leaf": 1,
    "max_depth": None,
    "per_node_features": False,
    "b0_fraction": 0.1,
    "batch_size": 25,
    "label_budget": None,
    "knn": 3,
    "folds": 10,
    "test_fraction": 0.2,
    "seeds": 20,
    "threshold": 0.01,
}


class CommandError(Exception):
    def __init__(self, message, code=2):
        super().__init__(message)
        self.code = code


def _global_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, help="master random seed (default 0)")
    g.add_argument("--config", help="JSON file with default settings")
    g.add_argument("--out", help="output directory")
    g.add_argument("--portfolio",
                   help=f"{'|'.join(PRESETS)} or a comma-separated solver list (default: all)")
    g.add_argument("--cutoff", type=float, help="runtime cutoff in seconds (default 1200)")
    g.add_argument("--strategy", choices=[s.value for s in QueryStrategy],
                   help="query strategy (default margin)")
    g.add_argument("--trees", type=int, help="forest size (default 99)")
    g.add_argument("--b0-fraction", type=float, help="initial batch fraction (default 0.1)")
    g.add_argument("--batch-size", type=int, help="labels bought per iteration (default 25)")
    g.add_argument("--knn", type=int, help="neighbours for imputation (default 3)")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = argparse.ArgumentParser(prog="satselect", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common], help="clean features + runtimes")
    p.add_argument("--features", required=True)
    p.add_argument("--runtimes", required=True)

    p = sub.add_parser("cv", parents=[common], help="k-fold cross-validation")
    p.add_argument("--dataset", required=True, help="directory with features.csv, runtimes.csv")
    p.add_argument("--folds", type=int)

    p = sub.add_parser("curve", parents=[common], help="active vs passive learning curves")
    p.add_argument("--dataset", required=True)
    p.add_argument("--strategies", help="comma list (default: all four)")
    p.add_argument("--seeds", type=int, help="number of repetitions (default 20)")
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--label-budget", type=int)

    p = sub.add_parser("extract", parents=[common], help="features of DIMACS CNF files")
    p.add_argument("cnf", nargs="+")

    p = sub.add_parser("synth", parents=[common], help="synthetic dataset")
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--solvers", type=int, default=3)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--missing", type=float, default=0.13)
    p.add_argument("--runtime-scale", type=float, default=10.0)

    p = sub.add_parser("impute-report", parents=[common], help="imputation report for features")
    p.add_argument("--features", required=True)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise CommandError(f"cannot read config {args.config}: {err}")
        unknown = set(from_file) - set(DEFAULTS)
        if unknown:
            raise CommandError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(from_file)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _forest_config(cfg: dict) -> ForestConfig:
    return ForestConfig(n_trees=cfg["trees"], feature_subset_size=cfg["feature_subset_size"],
                        bootstrap=cfg["bootstrap"], min_leaf=cfg["min_leaf"],
                        max_depth=cfg["max_depth"], per_node_features=cfg["per_node_features"],
                        seed=child_seed(cfg["seed"], "forest"))


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _echo_config(out: str, command: str, cfg: dict):
    _write(os.path.join(out, "config.json"),
           json.dumps({"command": command, **cfg}, indent=2, sort_keys=True) + "\n")


def _portfolio(cfg: dict) -> Optional[Portfolio]:
    return Portfolio.resolve(cfg["portfolio"]) if cfg["portfolio"] else None


def _load_dataset(features_path: str, runtimes_path: str, cfg: dict) -> LabeledDataset:
    f = load_features(features_path)
    m = load_runtimes(runtimes_path, cutoff_s=cfg["cutoff"])
    p = _portfolio(cfg)
    if p is not None:
        m = slice_portfolio(m, p)
    d, dropped = join(f, m)
    if dropped:
        log.warning("dropped %d instances (missing from one table or unsolved)", len(dropped))
    return d


def _labels_csv(path: str, d: LabeledDataset):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("instance,label,solver\n")
        for inst, lab in zip(d.instance_ids, d.y):
            fh.write(f"{inst},{int(lab)},{d.solver_names[lab]}\n")


def _write_dataset(out: str, d: LabeledDataset):
    write_features(os.path.join(out, "features.csv"), d.features)
    write_table(os.path.join(out, "runtimes.csv"), ["instance", *d.solver_names],
                d.instance_ids, d.runtimes)
    _labels_csv(os.path.join(out, "labels.csv"), d)


def cmd_preprocess(args, cfg) -> int:
    d = _load_dataset(args.features, args.runtimes, cfg)
    d, report = preprocess(d, k=cfg["knn"], threshold_s=cfg["threshold"])
    out = _out_dir(args)
    _write_dataset(out, d)
    _write(os.path.join(out, "report.json"), report.to_json() + "\n")
    _echo_config(out, "preprocess", cfg)
    print(f"{len(d)} instances, {len(d.feature_names)} features, "
          f"{report.imputed_fraction:.1%} of cells imputed")
    return 0


def _dataset_dir(args, cfg) -> LabeledDataset:
    return _load_dataset(os.path.join(args.dataset, "features.csv"),
                         os.path.join(args.dataset, "runtimes.csv"), cfg)


def cmd_cv(args, cfg) -> int:
    d = _dataset_dir(args, cfg)
    d, _ = drop_trivial_instances(d, cfg["threshold"])
    f, _ = drop_constant_features(d.features)
    d = d.with_features(f.feature_names, f.values)
    folds = cfg["folds"]
    if len(d) < 5 * folds:
        log.warning("only %d instances for %d folds; estimates will be noisy", len(d), folds)
    report = kfold_cv(d, _forest_config(cfg), folds=folds, seed=cfg["seed"], k_neighbors=cfg["knn"])
    out = _out_dir(args)
    _write(os.path.join(out, "metrics.json"), report.to_json() + "\n")
    _write(os.path.join(out, "metrics.txt"), report.table())
    _echo_config(out, "cv", cfg)
    print(report.table(), end="")
    return 0


def cmd_curve(args, cfg) -> int:
    d = _dataset_dir(args, cfg)
    d, _ = drop_trivial_instances(d, cfg["threshold"])
    requested = cfg["strategies"]
    if args.strategies is None and args.strategy is not None:
        requested = args.strategy
    strategies = [s.strip() for s in str(requested).split(",") if s.strip()]
    try:
        strategies = [QueryStrategy(s) for s in strategies]
    except ValueError as err:
        raise CommandError(str(err))
    acfg = ActiveConfig(b0_fraction=cfg["b0_fraction"], batch_size=cfg["batch_size"],
                        label_budget=cfg["label_budget"])
    fcfg = _forest_config(cfg)
    seeds = [child_seed(cfg["seed"], "curve", i) for i in range(cfg["seeds"])]
    points = learning_curve(d, strategies, acfg, fcfg, test_fraction=cfg["test_fraction"],
                            seeds=seeds, k_neighbors=cfg["knn"])
    out = _out_dir(args)
    _write(os.path.join(out, "curve.csv"), curve_csv(points))
    _echo_config(out, "curve", cfg)
    print(f"{len(points)} curve points written to {os.path.join(out, 'curve.csv')}")
    return 0


def _instance_name(path: str) -> str:
    name = os.path.basename(path)
    for ext in (".gz", ".bz2", ".xz"):
        if name.endswith(ext):
            name = name[: -len(ext)]
    for ext in (".cnf", ".dimacs"):
        if name.endswith(ext):
            name = name[: -len(ext)]
    return name


def cmd_extract(args, cfg) -> int:
    ids, rows = [], []
    for path in args.cnf:
        try:
            feats = extract_features(read_dimacs(path))
        except (ParseError, OSError, UnicodeDecodeError) as err:
            log.warning("skipping %s: %s", path, err)
            continue
        ids.append(_instance_name(path))
        rows.append([feats[n] for n in FEATURE_NAMES])
    if not rows:
        raise CommandError("no CNF file could be parsed", code=1)
    fm = FeatureMatrix(ids, FEATURE_NAMES, np.array(rows))
    comment = f"satselect structural features v{FEATURE_VERSION}"
    if args.out:
        out = _out_dir(args)
        write_features(os.path.join(out, "features.csv"), fm, comment)
        _echo_config(out, "extract", cfg)
    else:
        write_features(sys.stdout, fm, comment)
    return 0


def cmd_synth(args, cfg) -> int:
    d = synthetic_dataset(args.n, args.k, args.solvers, args.separation, args.missing,
                          args.runtime_scale, seed=cfg["seed"])
    out = _out_dir(args)
    _write_dataset(out, d)
    _echo_config(out, "synth", {**cfg, "n": args.n, "k": args.k, "solvers": args.solvers,
                                "separation": args.separation, "missing": args.missing,
                                "runtime_scale": args.runtime_scale})
    print(f"{len(d)} instances, {len(set(d.y.tolist()))} distinct labels written to {out}")
    return 0


def cmd_impute_report(args, cfg) -> int:
    f = load_features(args.features)
    Z, report = prepare_features(f, k=cfg["knn"])
    out = _out_dir(args)
    write_features(os.path.join(out, "features_imputed.csv"), Z)
    _write(os.path.join(out, "report.json"), report.to_json() + "\n")
    _echo_config(out, "impute-report", cfg)
    print(f"{report.imputed_cells} cells imputed ({report.imputed_fraction:.1%})")
    return 0


COMMANDS = {
    "preprocess": cmd_preprocess,
    "cv": cmd_cv,
    "curve": cmd_curve,
    "extract": cmd_extract,
    "synth": cmd_synth,
    "impute-report": cmd_impute_report,
}


def _attach_run_log(args):
    if not args.out:
        return None
    os.makedirs(args.out, exist_ok=True)
    handler = logging.FileHandler(os.path.join(args.out, "run.log"), encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logging.getLogger().addHandler(handler)
    log.info("satselect %s started %s", args.command, datetime.datetime.now().isoformat())
    return handler


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    root = logging.getLogger()
    previous_level = root.level
    # the root passes INFO so run.log is complete; the console filters by -v
    root.setLevel(logging.INFO)
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.INFO if args.verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root.addHandler(console)
    run_log = None
    try:
        cfg = resolve_config(args)
        run_log = _attach_run_log(args)
        return COMMANDS[args.command](args, cfg)
    except CommandError as err:
        print(f"satselect: error: {err}", file=sys.stderr)
        return err.code
    except (ValidationError, ParseError) as err:
        print(f"satselect: error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"satselect: error: {err}", file=sys.stderr)
        return 1
    finally:
        root.setLevel(previous_level)
        root.removeHandler(console)
        if run_log is not None:
            root.removeHandler(run_log)
            run_log.close()


if __name__ == "__main__":
    sys.exit(main())
