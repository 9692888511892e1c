"""Command-line entry point.

Subcommands reproduce the package's experiments end to end and emit
machine-readable artifacts (metrics.csv, summary.json, filters/*.dot,
responses.csv). Every run is deterministic given (config, seed); the
resolved configuration is echoed into the summary for reproducibility.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import backends, data_io, export, omk, training
from .errors import ConfigError, GomkcnError
from .graph import load_bundle, pad_graph


def _coerce(value, like):
    """Parse a --set override string to the type of the current value."""
    if isinstance(like, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    if isinstance(like, int) and not isinstance(like, bool):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, (tuple, list)):
        parts = [p for p in value.split(",") if p]
        if like and isinstance(like[0], float):
            return tuple(float(p) for p in parts)
        if like and isinstance(like[0], int):
            return tuple(int(p) for p in parts)
        return tuple(parts)
    return value


def resolve_config(cls, config_path=None, overrides=(), **fixed):
    """Build a config dataclass from defaults + JSON file + --set overrides.

    Unknown keys are rejected so typos fail loudly.
    """
    values = {}
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            values.update(json.load(fh))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        values[key.strip()] = val
    values.update(fixed)
    field_map = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(values) - set(field_map)
    if unknown:
        raise ConfigError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    defaults = cls()
    kwargs = {}
    for key, val in values.items():
        if isinstance(val, str) and not isinstance(getattr(defaults, key), str):
            val = _coerce(val, getattr(defaults, key))
        elif isinstance(val, list):
            val = tuple(val)
        kwargs[key] = val
    return dataclasses.replace(defaults, **kwargs)


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_dict(cfg):
    raw = dataclasses.asdict(cfg)
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in raw.items()}


def cmd_iso_learn(args):
    cfg = resolve_config(training.IsoLearnConfig, args.config, args.set,
                         **({"seed": args.seed} if args.seed is not None else {}))
    out = _outdir(args)
    results = training.run_iso_learning(cfg)
    rows = [(r.p, r.seed, int(r.recovered), f"{r.feature_mae:.6f}",
             f"{r.final_kappa:.6f}") for r in results]
    export.write_metrics_csv(out / "metrics.csv",
                             ["p", "seed", "recovered", "feature_mae",
                              "final_kappa"], rows)
    kappa_rows = []
    for r in results:
        for epoch, k in enumerate(r.kappa_trajectory):
            kappa_rows.append((r.p, r.seed, epoch, f"{k:.6f}"))
    export.write_metrics_csv(out / "kappa_trajectories.csv",
                             ["p", "seed", "epoch", "kappa"], kappa_rows)
    per_p = {}
    for r in results:
        per_p.setdefault(r.p, []).append(r)
    recovery_by_p = {str(p): float(np.mean([x.recovered for x in rs]))
                     for p, rs in per_p.items()}
    recovered = [r for r in results if r.recovered]
    summary = {
        "config": _config_dict(cfg),
        "recovery_rate": float(np.mean([r.recovered for r in results])),
        "recovery_by_p": recovery_by_p,
        "mean_feature_mae_recovered":
            float(np.mean([r.feature_mae for r in recovered])) if recovered else None,
        "max_kappa_bound": cfg.n * (cfg.t + 1),
    }
    export.write_summary(out / "summary.json", summary)
    filters_dir = out / "filters"
    for i, r in enumerate(results[:8]):
        export.write_dot(filters_dir / f"p{r.p}_seed{r.seed}.dot",
                         r.filter_adjacency, r.filter_features,
                         name=f"learned_{i}")
    print(f"recovery rate: {summary['recovery_rate']:.3f} "
          f"({len(recovered)}/{len(results)} runs)")
    return 0


def cmd_mine_patterns(args):
    cfg = resolve_config(training.MiningConfig, args.config, args.set,
                         **({"seed": args.seed} if args.seed is not None else {}))
    out = _outdir(args)
    result = training.run_pattern_mining(cfg)
    export.export_filters(out / "filters", result.filters)
    export.save_checkpoint(out / "checkpoint.json", result.filters,
                           config=_config_dict(cfg), epoch=cfg.epochs,
                           seed=cfg.seed)
    export.write_metrics_csv(
        out / "metrics.csv", ["epoch", "loss"],
        [(i, f"{v:.6f}") for i, v in enumerate(result.loss_trajectory)])
    counts = {f"filter_{j}": int(c)
              for j, c in enumerate(result.assignment_counts)}
    summary = {
        "config": _config_dict(cfg),
        "recovered_motifs": result.recovered,
        "n_recovered": len(result.recovered),
        "assignment_counts": counts,
        "mean_best_kappa": result.kappa_mean,
    }
    export.write_summary(out / "summary.json", summary)
    print(f"recovered {len(result.recovered)}/{len(cfg.motif_names)} motifs: "
          f"{sorted(result.recovered)}")
    return 0


def cmd_motif_classify(args):
    cfg = resolve_config(training.MotifClassifyConfig, args.config, args.set,
                         **({"seed": args.seed} if args.seed is not None else {}))
    out = _outdir(args)
    run, dataset = training.train_motif_classifier(cfg)
    export.write_metrics_csv(
        out / "metrics.csv", ["epoch", "loss", "val_accuracy"],
        [(e, f"{l:.6f}", f"{v:.6f}") for e, l, v in run.history])
    export.export_filters(out / "filters", run.model.all_filters())
    export.save_checkpoint(out / "checkpoint.json", run.model.all_filters(),
                           run.model.mlp_heads(), config=_config_dict(cfg),
                           epoch=cfg.epochs, seed=cfg.seed)
    sample = dataset.splits["test"][:4]
    rows = training.kernel_responses(run.model, dataset, run.batch,
                                     run.features, sample)
    export.write_metrics_csv(out / "responses.csv",
                             ["graph", "node", "filter", "kappa"], rows)
    summary = {"config": _config_dict(cfg),
               "test_accuracy": run.test_accuracy,
               "val_accuracy": run.history[-1][2] if run.history else None}
    export.write_summary(out / "summary.json", summary)
    print(f"test accuracy: {run.test_accuracy:.4f}")
    return 0


def cmd_node_classify(args):
    cfg = resolve_config(training.NodeClassifyConfig, args.config, args.set,
                         **({"seed": args.seed} if args.seed is not None else {}))
    dataset = data_io.load_node_dataset(args.manifest)
    out = _outdir(args)
    accs = []
    rows = []
    for s in range(args.repeats):
        run = training.train_node_classifier(
            dataset, dataclasses.replace(cfg, seed=cfg.seed + s))
        accs.append(run["test_accuracy"])
        rows.append((cfg.seed + s, f"{run['val_accuracy']:.6f}",
                     f"{run['test_accuracy']:.6f}", run["best_epoch"]))
    export.write_metrics_csv(out / "metrics.csv",
                             ["seed", "val_accuracy", "test_accuracy",
                              "best_epoch"], rows)
    summary = {"config": _config_dict(cfg), "dataset": dataset.name,
               "accuracy_mean": float(np.mean(accs)),
               "accuracy_std": float(np.std(accs)),
               "repeats": args.repeats}
    export.write_summary(out / "summary.json", summary)
    print(f"{dataset.name}: accuracy {np.mean(accs)*100:.2f} "
          f"+- {np.std(accs)*100:.2f} over {args.repeats} seeds")
    return 0


def cmd_graph_classify(args):
    cfg = resolve_config(training.GraphClassifyConfig, args.config, args.set,
                         **({"seed": args.seed} if args.seed is not None else {}))
    dataset = data_io.load_tudataset(args.dataset)
    out = _outdir(args)
    result = training.crossvalidate_graph_classifier(list(dataset.graphs),
                                                     dataset.labels, cfg)
    export.write_metrics_csv(
        out / "metrics.csv", ["fold", "test_accuracy"],
        [(i, f"{a:.6f}") for i, a in enumerate(result["fold_accuracies"])])
    summary = {"config": _config_dict(cfg), "dataset": dataset.name,
               "accuracy_mean": result["mean"], "accuracy_std": result["std"]}
    export.write_summary(out / "summary.json", summary)
    print(f"{dataset.name}: accuracy {result['mean']*100:.2f} "
          f"+- {result['std']*100:.2f} over {cfg.folds} folds")
    return 0


def cmd_kernel(args):
    ga, _ = load_bundle(args.graph_a)
    gb, _ = load_bundle(args.graph_b)
    m = max(ga.n, gb.n)
    ga, gb = pad_graph(ga, m), pad_graph(gb, m)
    kappa, matching = omk.gomk(ga, gb, args.t, args.tau, args.matcher)
    payload = {
        "kappa": kappa,
        "m": m,
        "t": args.t,
        "tau": args.tau,
        "matcher": args.matcher,
        "self_similarity": m * (args.t + 1),
        "matching": [[int(x), int(y), float(s)]
                     for (x, y), s in zip(matching.pairs,
                                          matching.pair_similarities)],
    }
    text = json.dumps(payload, indent=2)
    if args.out_file:
        Path(args.out_file).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_check(args):
    from . import checks

    out = _outdir(args) if args.out else None
    report = checks.run_invariant_suite(seed=args.seed or 0)
    failed = [name for name, entry in report.items() if not entry["passed"]]
    for name, entry in report.items():
        status = "PASS" if entry["passed"] else "FAIL"
        print(f"[{status}] {name}: {entry['detail']}")
    if out:
        export.write_summary(out / "summary.json", report)
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gomkcn",
        description="Graph optimal matching kernel experiments and checks")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker threads for batched kernels (0 = default)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        if needs_out:
            p.add_argument("--out", default="runs/latest", help="output directory")

    p = sub.add_parser("iso-learn", help="learn filters that reproduce target graphs")
    common(p)
    p.set_defaults(fn=cmd_iso_learn)

    p = sub.add_parser("mine-patterns", help="discover frequent subgraph patterns")
    common(p)
    p.set_defaults(fn=cmd_mine_patterns)

    p = sub.add_parser("motif-classify", help="train the planted-motif classifier")
    common(p)
    p.set_defaults(fn=cmd_motif_classify)

    p = sub.add_parser("node-classify", help="node classification on a bundle")
    common(p)
    p.add_argument("manifest", help="dataset manifest JSON")
    p.add_argument("--repeats", type=int, default=3, help="seeded repetitions")
    p.set_defaults(fn=cmd_node_classify)

    p = sub.add_parser("graph-classify", help="cross-validated graph classification")
    common(p)
    p.add_argument("dataset", help="dataset directory (multi-file text layout)")
    p.set_defaults(fn=cmd_graph_classify)

    p = sub.add_parser("kernel", help="kernel value between two graph bundles")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    p.add_argument("--t", type=int, default=3)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--matcher", choices=("greedy", "exact"), default="greedy")
    p.add_argument("--out-file", default=None)
    p.set_defaults(fn=cmd_kernel)

    p = sub.add_parser("check", help="run the numeric invariant suite")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads:
        backends.set_num_threads(args.threads)
    try:
        return args.fn(args)
    except GomkcnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
