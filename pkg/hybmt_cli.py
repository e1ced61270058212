#!/usr/bin/env python3
"""
HybMT command line
stats | testability | rank-faults | gen-data | train | atpg | compare
Each command writes its CSV outputs and a <command>.manifest.json into --out-dir.
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config_loader import get_config_manager
from core_utils import (TOOL_VERSION, DataFormatError, ExitCode, HybMTError, InvariantViolation,
                        ModelFormatError, ValidationError)
from fault_list import (Fault, annotate, enumerate_faults, rank_hard_faults, read_faults_csv,
                        select_random_faults, write_faults_csv)
from hybnn import HybNNConfig, HybNNModel, train_hybnn
from input_validation import FaultSpec, InputValidator, PathValidator
from label_generator import (NetLabelAccumulator, TrainingRows, generate_meta_labels, hard_fault_campaign,
                             label_circuit, meta_dataset, per_net_meta_labels, read_meta_labels_csv,
                             read_training_csv, split_rows, write_meta_labels_csv, write_training_csv)
from logic_sim import fault_simulate, write_coverage_csv, write_vectors_csv
from meta_forest import ForestConfig, feature_importance, train_forest, write_importance_csv
from model_io import load_model, save_bundle, save_model
from model_router import build_heuristic, hybnn_heuristic, svr_heuristic
from model_selection import cross_validate, write_cv_csv
from netlist import Circuit, load_bench
from podem_engine import (Outcome, compare_campaigns, read_campaign_summary, run_campaign,
                          write_campaign_csv, write_comparison_csv)
from run_manifest import RunManifest
from svr_model import SvrConfig, SvrModel, train_svr
from testability import TestabilityAnalysis, analyze, build_features, write_features_csv

logger = logging.getLogger("hybmt")


class _UsageErrorParser(argparse.ArgumentParser):
    """argparse reports usage problems as ValidationError so they map to exit code 1"""

    def error(self, message: str):
        raise ValidationError(f"{self.prog}: {message}")


# =============================================================================
# SHARED HELPERS
# =============================================================================

def _backtrack_limit(text: str) -> Optional[int]:
    if text.lower() in ('none', 'unlimited'):
        return None
    return InputValidator.validate_positive_int(text, "backtrack limit")


def _output_path(out_dir: Path, name: str) -> Path:
    if not PathValidator.is_safe_filename(name):
        raise ValidationError(f"Output name {name!r} must be a plain file name inside --out-dir")
    return out_dir / name


def _load_circuits(paths: Sequence[str]) -> List[Circuit]:
    circuits = [load_bench(PathValidator.require_file(p)) for p in paths]
    names = [c.name for c in circuits]
    if len(set(names)) != len(names):
        raise ValidationError(f"Netlists must have distinct file stems, got {names}")
    for circuit in circuits:
        logger.info(f"Parsed {circuit.name}: {len(circuit.gates)} gates, {circuit.num_nets} nets")
    return circuits


def select_faults(circuit: Circuit, analysis: TestabilityAnalysis, spec: FaultSpec) -> List[Fault]:
    """Fault list named by a parsed --faults value, annotated with detection probabilities"""
    if spec.mode == 'file':
        return read_faults_csv(spec.path, circuit)
    faults = annotate(enumerate_faults(circuit), analysis)
    if spec.mode == 'hard':
        return rank_hard_faults(faults, spec.k)
    if spec.mode == 'random':
        return select_random_faults(faults, spec.k, spec.seed)
    return faults


def _load_typed(path: str, expected: type, role: str):
    model = load_model(PathValidator.require_file(path))
    if not isinstance(model, expected):
        raise ModelFormatError(f"{path}: --{role} needs a {expected.__name__}, found {type(model).__name__}")
    return model


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_stats(args, manifest: RunManifest) -> None:
    circuits = _load_circuits(args.netlists)
    path = _output_path(args.out_dir, args.out)
    columns = list(circuits[0].summary())
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for circuit in circuits:
            summary = circuit.summary()
            writer.writerow([summary[c] for c in columns])
            print(json.dumps(summary))
    manifest.record_output(path)


def cmd_testability(args, manifest: RunManifest) -> None:
    for circuit in _load_circuits(args.netlists):
        table = build_features(circuit, analyze(circuit))
        path = _output_path(args.out_dir, f"{circuit.name}.features.csv")
        write_features_csv(path, table)
        manifest.record_output(path)
        print(f"{circuit.name}: {len(table)} nets -> {path}")


def cmd_rank_faults(args, manifest: RunManifest) -> None:
    spec = InputValidator.parse_fault_spec(args.faults, default_seed=args.seed)
    for circuit in _load_circuits(args.netlists):
        faults = select_faults(circuit, analyze(circuit), spec)
        path = _output_path(args.out_dir, f"{circuit.name}.faults.csv")
        write_faults_csv(path, circuit, faults)
        manifest.record_output(path)
        print(f"{circuit.name}: {len(faults)} faults ({spec.mode}) -> {path}")


def _per_net_meta_labels(circuit: Circuit, analysis: TestabilityAnalysis, hybnn: HybNNModel, svr: SvrModel,
                         args) -> Dict[Tuple[str, Optional[str]], int]:
    features = build_features(circuit, analysis)
    walks = []
    for heuristic in (hybnn_heuristic(hybnn, features, circuit), svr_heuristic(svr, features, circuit)):
        report = hard_fault_campaign(circuit, analysis, heuristic, args.k_hard, args.backtrack_limit, args.jobs)
        accumulator = NetLabelAccumulator.empty(circuit.num_nets)
        accumulator.add_campaign(report)
        walks.append(accumulator)
    labels = per_net_meta_labels(walks[0], walks[1])
    return {(circuit.name, circuit.nets[n].name): cls for n, cls in labels.items()}


def cmd_gen_data(args, manifest: RunManifest) -> None:
    per_net = args.labeling == 'per-net'
    if per_net and not (args.hybnn and args.svr):
        raise ValidationError("--labeling per-net needs --hybnn and --svr model files")
    hybnn = _load_typed(args.hybnn, HybNNModel, 'hybnn') if per_net else None
    svr = _load_typed(args.svr, SvrModel, 'svr') if per_net else None

    parts: List[TrainingRows] = []
    meta_labels: Dict[Tuple[str, Optional[str]], int] = {}
    for circuit in _load_circuits(args.netlists):
        analysis = analyze(circuit)
        labeled = label_circuit(circuit, analysis, args.k_hard, args.backtrack_limit, args.jobs)
        parts.append(labeled.rows())
        if per_net:
            meta_labels.update(_per_net_meta_labels(circuit, analysis, hybnn, svr, args))

    rows = TrainingRows.concat(parts)
    path = _output_path(args.out_dir, args.out)
    write_training_csv(path, rows)
    manifest.record_output(path)
    print(f"{len(rows)} training rows from {len(parts)} circuits -> {path}")

    if per_net:
        labels_path = _output_path(args.out_dir, args.meta_labels_out)
        write_meta_labels_csv(labels_path, meta_labels)
        manifest.record_output(labels_path)
        print(f"{len(meta_labels)} per-net meta labels -> {labels_path}")


def _family_config(family: str):
    config = get_config_manager()
    if family == 'hybnn':
        return HybNNConfig.from_config(config.get_section('hybnn'))
    if family == 'svr':
        return SvrConfig.from_config(config.get_section('svr'))
    return ForestConfig.from_config(config.get_section('meta'))


def _fit(family: str, X: np.ndarray, y: np.ndarray, config, seed: int, weight: Optional[np.ndarray] = None):
    if family == 'hybnn':
        model, history = train_hybnn(X, y, config, seed, sample_weight=weight)
        logger.info(f"HybNN: {history.epochs_run} epochs, best epoch {history.best_epoch}")
        return model
    if family == 'svr':
        model, stats = train_svr(X, y, config, seed, sample_weight=weight)
        logger.info(f"SVR: {stats.n_support} support vectors after {stats.iterations} iterations")
        return model
    return train_forest(X, y, config, seed)


def cmd_train(args, manifest: RunManifest) -> None:
    family = args.kind
    rows = read_training_csv(PathValidator.require_file(args.data))
    if len(rows) == 0:
        raise DataFormatError(f"{args.data}: no training rows")
    config_manager = get_config_manager()
    row_folds = args.folds or config_manager.get('datagen.folds')
    training = split_rows(rows, args.holdout, row_folds, args.seed)

    weight: Optional[np.ndarray] = None
    if family == 'meta':
        if not args.meta_labels:
            raise ValidationError("--kind meta needs --meta-labels")
        labels = read_meta_labels_csv(PathValidator.require_file(args.meta_labels))
        X, y = meta_dataset(training.train, labels)
        folds: Any = args.folds or config_manager.get('cross_validation.folds')
    else:
        X, y, weight = training.train.base, training.train.p, training.train.weight
        folds = training.folds

    config = _family_config(family)
    grid = InputValidator.parse_grid(args.grid, family)
    if len(grid) > 1 or args.cv_out:
        result = cross_validate(family, X, y, folds, grid, config, args.seed, sample_weight=weight)
        config = replace(config, **result.best_params)
        if args.cv_out:
            cv_path = _output_path(args.out_dir, args.cv_out)
            write_cv_csv(cv_path, result)
            manifest.record_output(cv_path)
        print(f"best {family} parameters: {result.best_params} ({result.metric} {result.best_score:.6g})")
    else:
        config = replace(config, **grid[0])

    model = _fit(family, X, y, config, args.seed, weight)
    model_path = _output_path(args.out_dir, args.out)
    save_model(model_path, model)
    manifest.record_output(model_path)
    manifest.flags['resolved_config'] = asdict(config)

    if training.test is not None and family != 'meta':
        mse = float(np.mean((model.predict(training.test.base) - training.test.p) ** 2))
        logger.info(f"Held-out circuit '{args.holdout}': MSE {mse:.6g} on {len(training.test)} rows")
        print(f"holdout {args.holdout}: mse {mse:.6g}")

    if family == 'meta':
        if args.importance_out:
            importance_path = _output_path(args.out_dir, args.importance_out)
            write_importance_csv(importance_path, feature_importance(model))
            manifest.record_output(importance_path)
        if args.bundle:
            if not (args.hybnn and args.svr):
                raise ValidationError("--bundle needs --hybnn and --svr model files")
            _load_typed(args.hybnn, HybNNModel, 'hybnn')
            _load_typed(args.svr, SvrModel, 'svr')
            bundle_path = _output_path(args.out_dir, args.bundle)
            save_bundle(bundle_path, model_path, args.hybnn, args.svr)
            manifest.record_output(bundle_path)
            print(f"bundle -> {bundle_path}")
    print(f"{family} model -> {model_path}")


def cmd_atpg(args, manifest: RunManifest) -> None:
    fault_spec = InputValidator.parse_fault_spec(args.faults, default_seed=args.seed)
    heuristic_spec = InputValidator.parse_heuristic_spec(args.heuristic)
    for circuit in _load_circuits(args.netlists):
        analysis = analyze(circuit)
        faults = select_faults(circuit, analysis, fault_spec)
        heuristic = build_heuristic(heuristic_spec, circuit, analysis)
        report = run_campaign(circuit, faults, heuristic, args.backtrack_limit, jobs=args.jobs)

        path = _output_path(args.out_dir, f"{circuit.name}.{heuristic_spec.kind}.campaign.csv")
        write_campaign_csv(path, circuit, report)
        manifest.record_output(path)

        if args.vectors:
            vectors = report.vectors(circuit)
            vectors_path = _output_path(args.out_dir, f"{circuit.name}.{heuristic_spec.kind}.vectors.csv")
            write_vectors_csv(vectors_path, circuit, vectors)
            manifest.record_output(vectors_path)
            detected = [r.fault for r in report.results if r.outcome is Outcome.DETECTED]
            coverage = fault_simulate(circuit, vectors, detected)
            if coverage.detected != len(detected):
                raise InvariantViolation(f"{circuit.name}: vectors detect {coverage.detected} of the "
                                         f"{len(detected)} faults PODEM reported detected")
            coverage_path = _output_path(args.out_dir, f"{circuit.name}.{heuristic_spec.kind}.coverage.csv")
            write_coverage_csv(coverage_path, circuit, fault_simulate(circuit, vectors, faults))
            manifest.record_output(coverage_path)

        summary = report.summary()
        print(f"{circuit.name} [{report.heuristic}]: coverage {summary['coverage_percent']:.2f}% "
              f"({report.detected}/{report.total}, {report.aborted} aborted), "
              f"backtraces {report.backtraces}, backtracks {report.backtracks}")


def cmd_compare(args, manifest: RunManifest) -> None:
    side_a = [read_campaign_summary(PathValidator.require_file(p)) for p in args.a]
    side_b = [read_campaign_summary(PathValidator.require_file(p)) for p in args.b]
    rows = compare_campaigns(side_a, side_b)
    path = _output_path(args.out_dir, args.out)
    write_comparison_csv(path, rows)
    manifest.record_output(path)

    print(f"{'circuit':<16} {'cov A':>8} {'cov B':>8} {'work A':>10} {'work B':>10} {'ratio':>9}")
    for row in rows:
        if row.missing:
            print(f"{row.circuit:<16} MISSING from {'A' if row.a is None else 'B'}")
            continue
        print(f"{row.circuit:<16} {row.a.coverage_percent:>8.2f} {row.b.coverage_percent:>8.2f} "
              f"{row.a.work:>10} {row.b.work:>10} {row.work_ratio:>9.4f}")

    if args.meta_labels_out:
        # A holds HybNN reports, B holds SVR reports
        results = {row.circuit: (row.a.work if row.a else None, row.b.work if row.b else None) for row in rows}
        labels = generate_meta_labels(results)
        labels_path = _output_path(args.out_dir, args.meta_labels_out)
        write_meta_labels_csv(labels_path, {(name, None): cls for name, cls in labels.items()})
        manifest.record_output(labels_path)
        print(f"{len(labels)} circuit meta labels -> {labels_path}")


# =============================================================================
# PARSER
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = _UsageErrorParser(prog='hybmt', description='HybMT - learned backtrace guidance for PODEM ATPG')
    parser.add_argument('--version', action='version', version=f'%(prog)s {TOOL_VERSION}')
    parser.add_argument('--config', help='YAML configuration file (default: config.yaml)')
    parser.add_argument('--seed', type=int, help='Master seed for every random stream')
    parser.add_argument('--jobs', type=lambda v: InputValidator.validate_positive_int(v, "jobs"),
                        help='Worker processes for fault campaigns')
    parser.add_argument('--out-dir', help='Directory for outputs and run manifests')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging level')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('stats', help='Circuit summary')
    p.add_argument('netlists', nargs='+')
    p.add_argument('--out', default='stats.csv')
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser('testability', help='Per-net feature dump')
    p.add_argument('netlists', nargs='+')
    p.set_defaults(func=cmd_testability)

    p = sub.add_parser('rank-faults', help='Hard-fault ranking or random fault selection')
    p.add_argument('netlists', nargs='+')
    p.add_argument('--faults', help='hard:K, random:K[:SEED], all or file:PATH')
    p.set_defaults(func=cmd_rank_faults)

    p = sub.add_parser('gen-data', help='No-backtrack labels from instrumented PODEM runs')
    p.add_argument('netlists', nargs='+')
    p.add_argument('--k-hard', type=lambda v: InputValidator.validate_positive_int(v, "k_hard"))
    p.add_argument('--backtrack-limit', type=_backtrack_limit)
    p.add_argument('--out', default='training.csv')
    p.add_argument('--labeling', choices=['survival', 'per-net'])
    p.add_argument('--hybnn', help='HybNN model for per-net meta labeling')
    p.add_argument('--svr', help='SVR model for per-net meta labeling')
    p.add_argument('--meta-labels-out', default='meta_labels.csv')
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser('train', help='Train HybNN, SVR or the meta-classifier')
    p.add_argument('--data', required=True, help='Training CSV from gen-data')
    p.add_argument('--kind', required=True, choices=['hybnn', 'svr', 'meta'])
    p.add_argument('--grid', help='Hyperparameter grid, e.g. "C=logspace(-3,4,8);epsilon=0.05,0.1"')
    p.add_argument('--holdout', help='Circuit left out of training')
    p.add_argument('--folds', type=lambda v: InputValidator.validate_positive_int(v, "folds"),
                   help='Folds (default: datagen.folds for the regressors, cross_validation.folds for meta)')
    p.add_argument('--meta-labels', help='Meta label CSV (required for --kind meta)')
    p.add_argument('--out', help='Model file name (default: <kind>.model)')
    p.add_argument('--cv-out', help='Cross-validation report CSV')
    p.add_argument('--importance-out', help='Meta feature-importance CSV')
    p.add_argument('--bundle', help='Write a HybMT bundle with --hybnn and --svr')
    p.add_argument('--hybnn', help='HybNN model file for the bundle')
    p.add_argument('--svr', help='SVR model file for the bundle')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('atpg', help='Run a PODEM campaign')
    p.add_argument('netlists', nargs='+')
    p.add_argument('--faults', help='hard:K, random:K[:SEED], all or file:PATH')
    p.add_argument('--heuristic', default='cop', help='cop, model:PATH or meta:BUNDLE')
    p.add_argument('--backtrack-limit', type=_backtrack_limit)
    p.add_argument('--vectors', action='store_true', help='Write and fault-simulate the generated vectors')
    p.set_defaults(func=cmd_atpg)

    p = sub.add_parser('compare', help='Side-by-side comparison of campaign reports')
    p.add_argument('--a', nargs='+', required=True, help='Campaign CSVs of side A')
    p.add_argument('--b', nargs='+', required=True, help='Campaign CSVs of side B')
    p.add_argument('--out', default='comparison.csv')
    p.add_argument('--meta-labels-out', help='Circuit meta labels (A = HybNN, B = SVR)')
    p.set_defaults(func=cmd_compare)
    return parser


def _apply_defaults(args: argparse.Namespace) -> None:
    """Fill unset flags from the configuration"""
    config = get_config_manager(Path(args.config) if args.config else None)
    defaults = {
        'seed': config.get('runtime.seed'),
        'jobs': config.get('runtime.jobs'),
        'out_dir': config.get('runtime.out_dir'),
        'faults': config.get('atpg.fault_spec'),
        'backtrack_limit': config.get('atpg.backtrack_limit'),
        'k_hard': config.get('datagen.k_hard'),
        'labeling': config.get('datagen.labeling'),
    }
    for name, value in defaults.items():
        if hasattr(args, name) and getattr(args, name) is None:
            setattr(args, name, value)
    if getattr(args, 'command', None) == 'train' and args.out is None:
        args.out = f"{args.kind}.model"
    args.out_dir = PathValidator.ensure_out_dir(args.out_dir)


def _setup_logging(level: Optional[str]) -> None:
    config = get_config_manager()
    logging.basicConfig(
        level=getattr(logging, (level or config.get('logging.level') or 'INFO').upper(), logging.INFO),
        format=config.get('logging.format'),
        stream=sys.stderr,
        force=True,
    )


def _manifest_inputs(args: argparse.Namespace) -> List[str]:
    inputs: List[str] = list(getattr(args, 'netlists', None) or [])
    for name in ('data', 'meta_labels', 'hybnn', 'svr'):
        if getattr(args, name, None):
            inputs.append(getattr(args, name))
    for name in ('a', 'b'):
        inputs.extend(getattr(args, name, None) or [])
    kind, _, model_path = (getattr(args, 'heuristic', None) or '').partition(':')
    if kind in ('model', 'meta') and model_path:
        inputs.append(model_path)
    return inputs


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _apply_defaults(args)
        _setup_logging(args.log_level)
        flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != 'func'}
        manifest = RunManifest(command=args.command, inputs=_manifest_inputs(args), seed=args.seed, flags=flags)
        handler: Callable[[argparse.Namespace, RunManifest], None] = args.func
        handler(args, manifest)
        manifest.write(args.out_dir)
        return ExitCode.OK
    except HybMTError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.INPUT
    except Exception as e:
        logger.exception(f"Internal error: {e}")
        return ExitCode.INTERNAL


if __name__ == "__main__":
    sys.exit(main())
