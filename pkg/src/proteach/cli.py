"""Batch experiment CLI.

Subcommands:

  gen-data   synthesize a dataset file
  train      run one (method, noise, seed) cell and write its metrics file
  sweep      run the full noise x seed grid and write per-cell files + summary
  audit      run one cell and tally abandoned samples by noise status
  export     run one cell and export the confusion matrix of a final model

Every subcommand accepts --config FILE plus flags mirroring the config keys
(see proteach.config for the schema); flags override the file. Exit codes:
0 success, 1 configuration error, 2 runtime failure in at least one cell.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from .config import (
    REPORTED_MODEL,
    SCHEMA,
    ExperimentConfig,
    build_experiment_config,
    cell_setup,
    derive_seeds,
    parse_config_file,
    parse_value,
    resolved_items,
)
from .data import DatasetSplit, make_synthetic_dataset, save_dataset
from .errors import ConfigurationError, ContractViolationError, DivergenceError
from .net import ParamSet
from .reporting import (
    SummaryCell,
    export_confusion,
    fmt,
    metrics_rows,
    write_metrics_file,
    write_summary,
)
from .trainer import TrainHistory, audit_abandoned, evaluate, train_baseline, train_pt


@dataclass
class CellResult:
    models: dict[str, ParamSet]
    history: TrainHistory
    dataset: DatasetSplit
    num_classes: int


def run_cell(exp: ExperimentConfig, noise_rate: float, seed: int) -> CellResult:
    cfg, dataset = cell_setup(exp, noise_rate, seed)
    if exp.method == "pt":
        g1, g2, history = train_pt(cfg, dataset)
        models = {
            "student1": g1.student,
            "student2": g2.student,
            "teacher1": g1.teacher.weights,
            "teacher2": g2.teacher.weights,
        }
    elif exp.method == "mean_teacher":
        group, history = train_baseline("mean_teacher", cfg, dataset)
        models = {"student1": group.student, "teacher1": group.teacher.weights}
    else:
        params, history = train_baseline(exp.method, cfg, dataset)
        models = {"student1": params}
    return CellResult(models=models, history=history, dataset=dataset, num_classes=cfg.net.num_classes)


def _cell_header(exp: ExperimentConfig, noise_rate: float, seed: int) -> dict[str, str]:
    header = resolved_items(exp)
    header["cell_noise_rate"] = fmt(noise_rate)
    header["cell_seed"] = str(seed)
    header["cell_seeds_derived"] = ",".join(str(v) for v in derive_seeds(seed))
    return header


def cell_file_name(exp: ExperimentConfig, noise_rate: float, seed: int) -> str:
    return f"{exp.method}_noise{noise_rate * 100:g}_seed{seed}.csv"


def _write_cell(exp: ExperimentConfig, noise_rate: float, seed: int, result: CellResult) -> Path:
    out_dir = Path(exp.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / cell_file_name(exp, noise_rate, seed)
    rows = metrics_rows(exp.method, noise_rate, seed, result.history)
    header = _cell_header(exp, noise_rate, seed)
    if result.history.diverged:
        header["cell_failed"] = result.history.divergence_note or "diverged"
    write_metrics_file(path, header, rows)
    return path


def run_experiment(exp: ExperimentConfig) -> int:
    """Train every (noise, seed) cell, write metrics files and the summary.

    Returns the process exit code: 0 when all cells finished, 2 when at least
    one diverged (the grid still completes and failed cells are flagged).
    """
    reported = REPORTED_MODEL[exp.method]
    cells: list[SummaryCell] = []
    any_failed = False
    for rate in exp.noise_rates:
        cell = SummaryCell(method=exp.method, noise=rate, accuracies=[], failed_seeds=[])
        for seed in exp.seeds:
            result = run_cell(exp, rate, seed)
            _write_cell(exp, rate, seed, result)
            if result.history.diverged or reported not in result.history.stable_accuracy:
                cell.failed_seeds.append(seed)
                any_failed = True
            else:
                cell.accuracies.append(result.history.stable_accuracy[reported])
        cells.append(cell)
    write_summary(Path(exp.output_dir) / "summary.csv", resolved_items(exp), cells)
    return 2 if any_failed else 0


def _add_schema_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="config file (key = value lines)")
    for key in SCHEMA:
        parser.add_argument(f"--{key.replace('_', '-')}", type=str, default=None, dest=key)


def _build_exp(args: argparse.Namespace) -> ExperimentConfig:
    overrides: dict[str, object] = {}
    if args.config is not None:
        overrides.update(parse_config_file(args.config))
    for key in SCHEMA:
        raw = getattr(args, key, None)
        if raw is not None:
            overrides[key] = parse_value(key, raw, where=f"--{key.replace('_', '-')}")
    return build_experiment_config(overrides)


def _single_cell(exp: ExperimentConfig) -> tuple[float, int]:
    if len(exp.noise_rates) != 1 or len(exp.seeds) != 1:
        raise ConfigurationError("this subcommand needs exactly one noise rate and one seed")
    return exp.noise_rates[0], exp.seeds[0]


def cmd_gen_data(args: argparse.Namespace) -> int:
    exp = _build_exp(args)
    split = make_synthetic_dataset(
        num_classes=exp.classes,
        n_labeled_per_class=exp.labeled_per_class,
        n_unlabeled=exp.unlabeled_count,
        n_test_per_class=exp.test_per_class,
        cluster_spread=exp.cluster_spread,
        class_imbalance=exp.class_imbalance or None,
        seed=args.seed,
        feature_dim=exp.feature_dim,
    )
    header = resolved_items(exp)
    header["generation_seed"] = str(args.seed)
    save_dataset(split, args.out, header=header)
    print(f"wrote {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    exp = _build_exp(args)
    rate, seed = _single_cell(exp)
    result = run_cell(exp, rate, seed)
    path = _write_cell(exp, rate, seed, result)
    print(f"wrote {path}")
    if result.history.diverged:
        print(f"run diverged: {result.history.divergence_note}", file=sys.stderr)
        return 2
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    exp = _build_exp(args)
    code = run_experiment(exp)
    print(f"wrote {Path(exp.output_dir) / 'summary.csv'}")
    return code


def cmd_audit(args: argparse.Namespace) -> int:
    exp = _build_exp(args)
    if exp.method != "pt":
        raise ConfigurationError("audit requires method = pt")
    if exp.noise_kind == "none":
        raise ConfigurationError("audit requires injected noise")
    rate, seed = _single_cell(exp)
    result = run_cell(exp, rate, seed)
    if result.history.diverged:
        print(f"run diverged: {result.history.divergence_note}", file=sys.stderr)
        return 2
    since = args.since_iteration
    if since is None:
        since = exp.turning_iteration
    tally = audit_abandoned(
        result.history, result.history.noise_audit, num_classes=result.num_classes,
        since_iteration=since,
    )
    header = _cell_header(exp, rate, seed)
    header["since_iteration"] = str(since)
    lines = [f"# {k} = {header[k]}" for k in sorted(header)]
    lines.append("category,events,fraction")
    total = max(tally.total, 1)
    lines.append(f"synthetic_noise,{tally.noise_events},{fmt(tally.noise_events / total)}")
    for c, count in enumerate(tally.clean_events_per_class):
        lines.append(f"class_{c},{int(count)},{fmt(int(count) / total)}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out}")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    exp = _build_exp(args)
    rate, seed = _single_cell(exp)
    result = run_cell(exp, rate, seed)
    if result.history.diverged:
        print(f"run diverged: {result.history.divergence_note}", file=sys.stderr)
        return 2
    model_name = args.model or REPORTED_MODEL[exp.method]
    if model_name not in result.models:
        raise ConfigurationError(f"model {model_name!r} not in {sorted(result.models)}")
    cfg, _ = cell_setup(exp, rate, seed)
    metrics = evaluate(result.models[model_name], result.dataset.test, cfg.net)
    header = _cell_header(exp, rate, seed)
    header["model"] = model_name
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_confusion(metrics, out, header)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proteach", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesize a dataset file")
    _add_schema_flags(p)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--seed", type=int, default=0, help="generation seed")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run a single cell")
    _add_schema_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run the noise x seed grid")
    _add_schema_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("audit", help="tally abandoned samples for one cell")
    _add_schema_flags(p)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--since-iteration", type=int, default=None,
                   help="count events from this iteration on (default: turning_iteration)")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("export", help="export a confusion matrix for one cell")
    _add_schema_flags(p)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--model", type=str, default=None,
                   help="which final model to export (default: the reported one)")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ContractViolationError, DivergenceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
