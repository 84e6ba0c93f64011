"""Command-line entry point.

Subcommands: ``synth`` (dataset generation), ``analyze-kappa`` (privacy
distance of a pairs file), ``train`` (private metric learning),
``evaluate`` (kNN accuracy of a saved model), ``sweep``
(accuracy-versus-budget grid) and ``compare-mechanisms`` (one-epoch
objective traces per mechanism).

Every artifact-producing run writes a ``resolved_config.json`` capturing
all defaults plus the seed; re-running with ``--config`` on that file
reproduces the outputs byte-identically. Exit codes: 0 success, 2
usage/config errors, 3 runtime failures. ``DPP_THREADS`` caps sweep
parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio, evaluation, kappa as kappa_mod
from .dml import MetricModel, TrainConfig, train
from .errors import DppError
from .pairgraph import build_graph, read_pairs_file, write_pairs_file

_CONFIG_KEYS_IGNORED = {"command"}

TRAIN_FIELDS = (
    "d_prime", "margin", "margin_ratio", "lipschitz", "batch_size", "t_max",
    "epsilon", "delta", "mechanism", "sensitivity_mode", "norm_mode",
    "init_scale", "staircase_gamma", "batch_mode",
)

MECHANISM_VARIANTS = {
    "lap": ("laplace", "basic"),
    "lap_s": ("laplace", "reduced"),
    "scdf": ("staircase", "basic"),
    "duchi": ("duchi", "basic"),
}


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, fieldnames, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow(
                [repr(float(v)) if isinstance(v, float) else v for v in row]
            )


def _float_list(value) -> list[float]:
    if isinstance(value, str):
        return [float(v) for v in value.split(",") if v.strip()]
    return [float(v) for v in value]


def _str_list(value) -> list[str]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def _resolve(defaults: dict, args: argparse.Namespace) -> dict:
    """Layer explicit CLI flags over the config file over defaults."""
    merged = dict(defaults)
    provided = vars(args)
    config_path = provided.pop("config", None)
    if config_path:
        with open(config_path) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise DppError(f"config file {config_path} must hold a JSON object")
        for key, value in loaded.items():
            if key in _CONFIG_KEYS_IGNORED:
                continue
            if key not in merged:
                raise DppError(f"config file {config_path}: unknown key {key!r}")
            merged[key] = value
    for key, value in provided.items():
        if key in ("command", "func"):
            continue
        merged[key] = value
    return merged


def _train_config(cfg: dict, seed: int) -> TrainConfig:
    return TrainConfig(seed=seed, **{k: cfg[k] for k in TRAIN_FIELDS})


def _require(cfg: dict, key: str):
    if cfg.get(key) in (None, ""):
        raise DppError(f"missing required option --{key.replace('_', '-')}")
    return cfg[key]


def _load_dataset(cfg: dict):
    samples = dataio.load_csv(_require(cfg, "data"))
    pairs = read_pairs_file(_require(cfg, "pairs"))
    graph = build_graph(pairs, cfg.get("relation", "transitive"))
    return samples, pairs, graph


def _emit_resolved(cfg: dict, command: str) -> None:
    out_dir = cfg.get("out_dir")
    if out_dir:
        _write_json(
            Path(out_dir) / "resolved_config.json",
            {"command": command, **cfg},
        )


# --- subcommand handlers -----------------------------------------------------


SYNTH_DEFAULTS = {
    "seed": 0,
    "out_dir": "out",
    "n_per_class": 100,
    "mode": "toy",
    "density": 2.0,
    "balance": False,
    "intra": 50,
    "inter": 50,
    "norm_mode": "l1",
}


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _resolve(SYNTH_DEFAULTS, args)
    samples = dataio.synth_two_gaussians(cfg["n_per_class"], seed=cfg["seed"])
    samples = dataio.normalize(samples, cfg["norm_mode"])
    if cfg["mode"] == "toy":
        pairs = dataio.toy_pairs(
            samples, cfg["intra"], cfg["inter"], seed=cfg["seed"]
        )
    else:
        pairs = dataio.sample_pairs(
            samples, cfg["density"], balance=cfg["balance"], seed=cfg["seed"]
        )
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    dataio.save_samples_csv(out / "samples.csv", samples)
    write_pairs_file(out / "pairs.csv", pairs)
    _emit_resolved(cfg, "synth")
    print(f"wrote {out / 'samples.csv'} ({len(samples)} samples) and "
          f"{out / 'pairs.csv'} ({len(pairs)} pairs)")
    return 0


ANALYZE_DEFAULTS = {
    "seed": 0,
    "out_dir": None,
    "pairs": None,
    "relation": "transitive",
    "method": "auto",
    "exact_limit": kappa_mod.DEFAULT_EXACT_LIMIT,
}


def cmd_analyze_kappa(args: argparse.Namespace) -> int:
    cfg = _resolve(ANALYZE_DEFAULTS, args)
    pairs = read_pairs_file(_require(cfg, "pairs"))
    graph = build_graph(pairs, cfg["relation"])
    report = kappa_mod.compute_kappa(
        graph, method=cfg["method"], exact_limit=cfg["exact_limit"]
    )
    print(json.dumps(report.to_dict(), sort_keys=True))
    if cfg.get("out_dir"):
        _write_json(Path(cfg["out_dir"]) / "kappa.json", report.to_dict())
        _emit_resolved(cfg, "analyze-kappa")
    return 0


TRAIN_DEFAULTS = {
    "seed": 0,
    "out_dir": "out",
    "pairs": None,
    "relation": "transitive",
    "kappa_method": "auto",
    "exact_limit": kappa_mod.DEFAULT_EXACT_LIMIT,
    "model_out": None,
    "trace_out": None,
    "d_prime": 2,
    "margin": None,
    "margin_ratio": 1.0,
    "lipschitz": 0.5,
    "batch_size": 50,
    "t_max": 10,
    "epsilon": 2.0,
    "delta": 0.0,
    "mechanism": "laplace",
    "sensitivity_mode": "reduced",
    "norm_mode": "l1",
    "init_scale": 0.1,
    "staircase_gamma": None,
    "batch_mode": "shuffle",
}


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve(TRAIN_DEFAULTS, args)
    pairs = read_pairs_file(_require(cfg, "pairs"))
    graph = build_graph(pairs, cfg["relation"])
    report = kappa_mod.compute_kappa(
        graph, method=cfg["kappa_method"], exact_limit=cfg["exact_limit"]
    )
    print(f"privacy distance kappa={report.kappa} ({report.method})")
    config = _train_config(cfg, cfg["seed"])
    model, trace = train(pairs, graph, config, kappa_report=report)

    out = Path(cfg["out_dir"])
    model_path = Path(cfg["model_out"]) if cfg["model_out"] else out / "model.json"
    trace_path = Path(cfg["trace_out"]) if cfg["trace_out"] else out / "trace.csv"
    participants = sorted(
        {p.i for p in pairs} | {p.j for p in pairs}, key=lambda v: (str(type(v)), v)
    )
    payload = model.to_dict()
    payload.update(
        {
            "kappa": trace.kappa,
            "kappa_method": trace.kappa_method,
            "margin": trace.margin,
            "train_ids": list(participants),
        }
    )
    _write_json(model_path, payload)
    rows = [
        (
            r["iter"], r["epoch"], r["objective"], r["eta"],
            r["sens_basic"], r["sens_reduced_min"], r["sens_reduced_max"],
        )
        for r in trace.rows()
    ]
    _write_csv(
        trace_path,
        ["iter", "epoch", "objective", "eta", "sens_basic",
         "sens_reduced_min", "sens_reduced_max"],
        rows,
    )
    _emit_resolved(cfg, "train")
    print(f"wrote {model_path} and {trace_path} "
          f"(final objective {trace.objectives[-1]:.6f})")
    return 0


EVALUATE_DEFAULTS = {
    "seed": 0,
    "out_dir": None,
    "model": None,
    "data": None,
    "pairs": None,
    "k": 5,
}


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _resolve(EVALUATE_DEFAULTS, args)
    with open(_require(cfg, "model")) as fh:
        payload = json.load(fh)
    model = MetricModel.from_dict(payload)
    samples = dataio.load_csv(_require(cfg, "data"))
    if cfg.get("pairs"):
        pairs = read_pairs_file(cfg["pairs"])
        train_idx, test_idx = evaluation.split_by_participation(samples, pairs)
    else:
        train_ids = payload.get("train_ids")
        if train_ids is None:
            raise DppError(
                "model file carries no train_ids; pass --pairs to define the split"
            )
        index = samples.index_of()
        train_idx = np.array(sorted(index[i] for i in train_ids))
        mask = np.ones(len(samples), dtype=bool)
        mask[train_idx] = False
        test_idx = np.flatnonzero(mask)
    if len(test_idx) == 0:
        test_idx = train_idx
    acc = evaluation.knn_accuracy(
        model,
        samples.x[train_idx],
        samples.labels[train_idx],
        samples.x[test_idx],
        samples.labels[test_idx],
        cfg["k"],
    )
    result = {
        "accuracy": acc,
        "k": cfg["k"],
        "train_size": int(len(train_idx)),
        "test_size": int(len(test_idx)),
    }
    print(json.dumps(result, sort_keys=True))
    if cfg.get("out_dir"):
        _write_json(Path(cfg["out_dir"]) / "accuracy.json", result)
        _emit_resolved(cfg, "evaluate")
    return 0


SWEEP_DEFAULTS = {
    "seed": 0,
    "out_dir": "out",
    "data": None,
    "pairs": None,
    "relation": "transitive",
    "methods": "nonpriv,dpp,dpp_s,node_dp,input_per",
    "epsilons": "1,2,3,4",
    "repeats": 20,
    "k": 5,
    "sweep_out": None,
    **{k: TRAIN_DEFAULTS[k] for k in TRAIN_FIELDS},
}


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _resolve(SWEEP_DEFAULTS, args)
    samples, pairs, graph = _load_dataset(cfg)
    methods = _str_list(cfg["methods"])
    epsilons = _float_list(cfg["epsilons"])
    base = _train_config(cfg, cfg["seed"])
    kappa_default = kappa_mod.compute_kappa(graph)
    kappa_node = kappa_mod.kappa_node_dp(graph)
    print(f"privacy distance kappa={kappa_default.kappa} "
          f"({kappa_default.method}); node-dp kappa={kappa_node.kappa}")

    threads = max(1, int(os.environ.get("DPP_THREADS", "1")))
    common = dict(
        repeats=cfg["repeats"], config=base, seed=cfg["seed"], k=cfg["k"],
        kappa_default=kappa_default, kappa_node=kappa_node,
    )
    if threads > 1:
        cells = [(m, e) for m in methods for e in epsilons]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(
                    lambda cell: evaluation.run_experiment(
                        samples, pairs, graph, [cell[0]], [cell[1]], **common
                    )[0],
                    cells,
                )
            )
        reports = results
    else:
        reports = evaluation.run_experiment(
            samples, pairs, graph, methods, epsilons, **common
        )

    out = Path(cfg["out_dir"])
    sweep_path = Path(cfg["sweep_out"]) if cfg["sweep_out"] else out / "sweep.csv"
    rows = []
    for rep in reports:
        for run, acc in enumerate(rep.per_run):
            rows.append((rep.method, rep.epsilon, run, acc))
    _write_csv(sweep_path, ["method", "epsilon", "run", "accuracy"], rows)
    _emit_resolved(cfg, "sweep")
    for rep in reports:
        print(f"{rep.method:10s} eps={rep.epsilon:<6g} "
              f"acc={rep.mean_accuracy:.4f} +- {rep.std_accuracy:.4f}")
    print(f"wrote {sweep_path}")
    return 0


COMPARE_DEFAULTS = {
    "seed": 0,
    "out_dir": "out",
    "pairs": None,
    "relation": "transitive",
    "mechanisms": "lap,lap_s,scdf,duchi",
    "compare_out": None,
    **{k: TRAIN_DEFAULTS[k] for k in TRAIN_FIELDS},
}


def cmd_compare_mechanisms(args: argparse.Namespace) -> int:
    cfg = _resolve(COMPARE_DEFAULTS, args)
    pairs = read_pairs_file(_require(cfg, "pairs"))
    graph = build_graph(pairs, cfg["relation"])
    report = kappa_mod.compute_kappa(graph)
    print(f"privacy distance kappa={report.kappa} ({report.method})")
    names = _str_list(cfg["mechanisms"])
    for name in names:
        if name not in MECHANISM_VARIANTS:
            raise DppError(
                f"unknown mechanism {name!r}; expected one of "
                f"{sorted(MECHANISM_VARIANTS)}"
            )
    columns = {}
    for name in names:
        mech, sens = MECHANISM_VARIANTS[name]
        config = _train_config({**cfg, "mechanism": mech,
                                "sensitivity_mode": sens, "t_max": 1},
                               cfg["seed"])
        _, trace = train(pairs, graph, config, kappa_report=report)
        columns[name] = trace.objectives
    n_iter = min(len(v) for v in columns.values())
    out = Path(cfg["out_dir"])
    path = Path(cfg["compare_out"]) if cfg["compare_out"] else out / "mechanisms.csv"
    rows = [
        tuple([it + 1] + [columns[name][it] for name in names])
        for it in range(n_iter)
    ]
    _write_csv(path, ["iter"] + names, rows)
    _emit_resolved(cfg, "compare-mechanisms")
    print(f"wrote {path}")
    return 0


# --- parser -------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--config", help="JSON file of defaults for this command")
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d-prime", dest="d_prime", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--margin-ratio", dest="margin_ratio", type=float)
    p.add_argument("--lipschitz", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--t-max", dest="t_max", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--mechanism",
                   choices=["none", "laplace", "gaussian", "staircase", "duchi"])
    p.add_argument("--sensitivity-mode", dest="sensitivity_mode",
                   choices=["basic", "reduced"])
    p.add_argument("--norm-mode", dest="norm_mode", choices=["l1", "l2"])
    p.add_argument("--init-scale", dest="init_scale", type=float)
    p.add_argument("--staircase-gamma", dest="staircase_gamma", type=float)
    p.add_argument("--batch-mode", dest="batch_mode",
                   choices=["shuffle", "component"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dppdml",
        description="Differentially pairwise-private distance metric learning",
    )
    parser.set_defaults(func=None)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="generate a synthetic dataset",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--n-per-class", dest="n_per_class", type=int)
    p.add_argument("--mode", choices=["toy", "density"])
    p.add_argument("--density", type=float)
    p.add_argument("--balance", action="store_true")
    p.add_argument("--intra", type=int)
    p.add_argument("--inter", type=int)
    p.add_argument("--norm-mode", dest="norm_mode", choices=["l1", "l2"])
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze-kappa", help="privacy distance of a pairs file",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--pairs")
    p.add_argument("--relation", choices=["transitive", "intransitive"])
    p.add_argument("--method", choices=["exact", "upper", "node-dp", "auto"])
    p.add_argument("--exact-limit", dest="exact_limit", type=int)
    p.set_defaults(func=cmd_analyze_kappa)

    p = sub.add_parser("train", help="train a private metric",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--pairs")
    p.add_argument("--relation", choices=["transitive", "intransitive"])
    p.add_argument("--kappa-method", dest="kappa_method",
                   choices=["exact", "upper", "node-dp", "auto"])
    p.add_argument("--exact-limit", dest="exact_limit", type=int)
    p.add_argument("--out", dest="model_out", help="model file path")
    p.add_argument("--trace", dest="trace_out", help="trace CSV path")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="kNN accuracy of a saved model",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--pairs", help="training pairs defining the split")
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="accuracy sweep over methods and budgets",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--pairs")
    p.add_argument("--relation", choices=["transitive", "intransitive"])
    p.add_argument("--methods")
    p.add_argument("--epsilons")
    p.add_argument("--repeats", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--out", dest="sweep_out", help="sweep CSV path")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare-mechanisms",
                       help="one-epoch objective traces per mechanism",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--pairs")
    p.add_argument("--relation", choices=["transitive", "intransitive"])
    p.add_argument("--mechanisms")
    p.add_argument("--out", dest="compare_out", help="comparison CSV path")
    _add_train_flags(p)
    p.set_defaults(func=cmd_compare_mechanisms)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.func is None:
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (DppError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
