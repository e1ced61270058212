#!/usr/bin/env python3
"""
Training data generation
Per-net no-backtrack labels from instrumented PODEM walks, leave-one-out/k-fold
training sets and circuit-level meta labels.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from core_utils import DataFormatError, SeedStreams, ValidationError, performance_monitor
from fault_list import annotate, enumerate_faults, rank_hard_faults
from netlist import Circuit
from podem_engine import DEFAULT_BACKTRACK_LIMIT, BacktraceHeuristic, CampaignReport, cop_baseline_heuristic, run_campaign
from testability import EXTENDED_FEATURE_NAMES, BASE_DIM, FeatureTable, TestabilityAnalysis, build_features

logger = logging.getLogger(__name__)

HYBNN_CLASS = 0
SVR_CLASS = 1


# =============================================================================
# LABEL ACCUMULATION
# =============================================================================

@dataclass(frozen=True, eq=False)
class NetLabelAccumulator:
    """Per-net walk frequencies: f_total occurrences, f_success on surviving decisions"""
    f_total: np.ndarray
    f_success: np.ndarray

    @classmethod
    def empty(cls, num_nets: int) -> "NetLabelAccumulator":
        return cls(f_total=np.zeros(num_nets, dtype=np.int64), f_success=np.zeros(num_nets, dtype=np.int64))

    def add_walk(self, path: Iterable[int], survived: bool) -> None:
        for net in set(path):
            self.f_total[net] += 1
            if survived:
                self.f_success[net] += 1

    def add_campaign(self, report: CampaignReport) -> None:
        """Accrue every recorded walk of a campaign run with decision logs"""
        for result in report.results:
            if result.decision_log is None:
                raise ValidationError("Campaign was run without decision logs")
            for record in result.decision_log:
                self.add_walk(record.path, survived=not record.reversed)

    def merge(self, other: "NetLabelAccumulator") -> "NetLabelAccumulator":
        if len(self.f_total) != len(other.f_total):
            raise ValidationError("Cannot merge label accumulators of different circuits")
        return NetLabelAccumulator(f_total=self.f_total + other.f_total, f_success=self.f_success + other.f_success)

    @property
    def reversals(self) -> np.ndarray:
        return self.f_total - self.f_success

    def labeled_nets(self) -> np.ndarray:
        return np.flatnonzero(self.f_total > 0)

    def probability(self) -> np.ndarray:
        """f_success / f_total; NaN for nets never traversed"""
        p = np.full(len(self.f_total), np.nan)
        mask = self.f_total > 0
        p[mask] = self.f_success[mask] / self.f_total[mask]
        return p


def hard_fault_campaign(circuit: Circuit, analysis: TestabilityAnalysis, heuristic: BacktraceHeuristic,
                        k_hard: int, backtrack_limit: Optional[int], jobs: int = 1) -> CampaignReport:
    """Run the k hardest faults with decision logging"""
    faults = rank_hard_faults(annotate(enumerate_faults(circuit), analysis), k_hard)
    return run_campaign(circuit, faults, heuristic, backtrack_limit, jobs=jobs, record_decisions=True)


@performance_monitor("label_generator.generate_labels")
def generate_labels(circuit: Circuit, analysis: TestabilityAnalysis, k_hard: int = 100,
                    backtrack_limit: Optional[int] = DEFAULT_BACKTRACK_LIMIT, jobs: int = 1) -> NetLabelAccumulator:
    """Label nets by whether the decisions their walks produced survived, under the COP heuristic"""
    report = hard_fault_campaign(circuit, analysis, cop_baseline_heuristic(circuit, analysis),
                                 k_hard, backtrack_limit, jobs)
    labels = NetLabelAccumulator.empty(circuit.num_nets)
    labels.add_campaign(report)
    logger.info(f"{circuit.name}: {len(labels.labeled_nets())} labeled nets from {report.total} faults, "
                f"{report.backtracks} backtracks")
    return labels


# =============================================================================
# TRAINING ROWS
# =============================================================================

TRAINING_CSV_HEADER: Tuple[str, ...] = ('circuit', 'net') + EXTENDED_FEATURE_NAMES + ('f_total', 'f_success', 'p')


@dataclass(frozen=True, eq=False)
class TrainingRows:
    """Row-aligned arrays; base features are the first 17 extended columns"""
    circuit: np.ndarray
    net: np.ndarray
    extended: np.ndarray
    f_total: np.ndarray
    f_success: np.ndarray
    p: np.ndarray

    def __len__(self) -> int:
        return len(self.p)

    @property
    def base(self) -> np.ndarray:
        return self.extended[:, :BASE_DIM]

    @property
    def weight(self) -> np.ndarray:
        """Walk count f_total of each row's net as a float sample weight"""
        return self.f_total.astype(np.float64)

    def subset(self, index: np.ndarray) -> "TrainingRows":
        return TrainingRows(circuit=self.circuit[index], net=self.net[index], extended=self.extended[index],
                            f_total=self.f_total[index], f_success=self.f_success[index], p=self.p[index])

    def circuits(self) -> List[str]:
        return sorted(set(self.circuit.tolist()))

    @classmethod
    def concat(cls, parts: Sequence["TrainingRows"]) -> "TrainingRows":
        if not parts:
            return cls.empty()
        return cls(
            circuit=np.concatenate([r.circuit for r in parts]),
            net=np.concatenate([r.net for r in parts]),
            extended=np.vstack([r.extended for r in parts]),
            f_total=np.concatenate([r.f_total for r in parts]),
            f_success=np.concatenate([r.f_success for r in parts]),
            p=np.concatenate([r.p for r in parts]),
        )

    @classmethod
    def empty(cls) -> "TrainingRows":
        return cls(circuit=np.array([], dtype=object), net=np.array([], dtype=object),
                   extended=np.zeros((0, len(EXTENDED_FEATURE_NAMES))), f_total=np.zeros(0, dtype=np.int64),
                   f_success=np.zeros(0, dtype=np.int64), p=np.zeros(0))


@dataclass(frozen=True, eq=False)
class LabeledCircuit:
    """Features and walk labels of one circuit"""
    name: str
    features: FeatureTable
    labels: NetLabelAccumulator

    def rows(self) -> TrainingRows:
        """Only traversed nets produce rows"""
        nets = self.labels.labeled_nets()
        f_total = self.labels.f_total[nets]
        f_success = self.labels.f_success[nets]
        return TrainingRows(
            circuit=np.array([self.name] * len(nets), dtype=object),
            net=np.array([self.features.net_names[n] for n in nets], dtype=object),
            extended=self.features.extended[nets],
            f_total=f_total,
            f_success=f_success,
            p=f_success / f_total,
        )


def label_circuit(circuit: Circuit, analysis: TestabilityAnalysis, k_hard: int = 100,
                  backtrack_limit: Optional[int] = DEFAULT_BACKTRACK_LIMIT, jobs: int = 1) -> LabeledCircuit:
    labels = generate_labels(circuit, analysis, k_hard, backtrack_limit, jobs)
    return LabeledCircuit(name=circuit.name, features=build_features(circuit, analysis), labels=labels)


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Training partition with fold ids, plus the held-out circuit's rows"""
    train: TrainingRows
    folds: np.ndarray
    k: int
    holdout: Optional[str] = None
    test: Optional[TrainingRows] = None

    def fold_sizes(self) -> List[int]:
        return [int(np.sum(self.folds == f)) for f in range(self.k)]

    def split(self, fold: int) -> Tuple[np.ndarray, np.ndarray]:
        """(train indices, validation indices) for one fold"""
        return np.flatnonzero(self.folds != fold), np.flatnonzero(self.folds == fold)


def assign_folds(rows: TrainingRows, k: int, seed: int) -> np.ndarray:
    """
    Circuit-stratified round-robin fold ids

    Rows of each circuit are shuffled with their own seeded stream; one counter
    then deals rows to folds across circuits in name order, so fold sizes differ by at most one.
    """
    folds = np.zeros(len(rows), dtype=np.int64)
    streams = SeedStreams(seed)
    counter = 0
    for index, name in enumerate(rows.circuits()):
        members = np.flatnonzero(rows.circuit == name)
        order = streams.rng("folds", index).permutation(len(members))
        for position in members[order]:
            folds[position] = counter % k
            counter += 1
    return folds


def split_rows(rows: TrainingRows, holdout: Optional[str], folds: int, seed: int) -> TrainingSet:
    """Exclude the holdout circuit and assign k folds to the remaining rows"""
    if folds < 2:
        raise ValidationError(f"k-fold split needs k >= 2, got {folds}")
    names = rows.circuits()
    test = None
    if holdout is not None:
        if holdout not in names:
            raise ValidationError(f"Holdout circuit '{holdout}' is not in the data ({', '.join(names)})")
        if len(names) < 2:
            raise ValidationError("Leave-one-out needs at least 2 circuits")
        mask = rows.circuit == holdout
        test = rows.subset(np.flatnonzero(mask))
        rows = rows.subset(np.flatnonzero(~mask))
    if folds > len(rows):
        raise ValidationError(f"k = {folds} exceeds the {len(rows)} training rows")
    return TrainingSet(train=rows, folds=assign_folds(rows, folds, seed), k=folds, holdout=holdout, test=test)


def assemble_training_set(circuits: Sequence[LabeledCircuit], holdout: Optional[str], folds: int = 5,
                          seed: int = 0) -> TrainingSet:
    """Leave-one-out and k-fold assembly over labeled circuits"""
    if len(circuits) < 2:
        raise ValidationError(f"A training set needs at least 2 circuits, got {len(circuits)}")
    names = [c.name for c in circuits]
    if len(set(names)) != len(names):
        raise ValidationError(f"Duplicate circuit names in training data: {names}")
    return split_rows(TrainingRows.concat([c.rows() for c in circuits]), holdout, folds, seed)


def _format_number(value: float) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def write_training_csv(path: Union[str, Path], rows: TrainingRows) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(TRAINING_CSV_HEADER)
        for i in range(len(rows)):
            writer.writerow([rows.circuit[i], rows.net[i]]
                            + [_format_number(v) for v in rows.extended[i]]
                            + [int(rows.f_total[i]), int(rows.f_success[i]), repr(float(rows.p[i]))])


def read_training_csv(path: Union[str, Path]) -> TrainingRows:
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = tuple(next(reader, ()))
        if header != TRAINING_CSV_HEADER:
            raise DataFormatError(f"{path}: unexpected training CSV header")
        circuits, nets, features, totals, successes, ps = [], [], [], [], [], []
        width = len(EXTENDED_FEATURE_NAMES)
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            try:
                features.append([float(v) for v in row[2:2 + width]])
                totals.append(int(row[2 + width]))
                successes.append(int(row[3 + width]))
                ps.append(float(row[4 + width]))
            except ValueError as e:
                raise DataFormatError(f"{path}:{line_no}: {e}") from None
            if not 0.0 <= ps[-1] <= 1.0 or not 0 <= successes[-1] <= totals[-1]:
                raise DataFormatError(f"{path}:{line_no}: label out of range")
            circuits.append(row[0])
            nets.append(row[1])
    if not ps:
        return TrainingRows.empty()
    return TrainingRows(
        circuit=np.array(circuits, dtype=object), net=np.array(nets, dtype=object),
        extended=np.array(features, dtype=np.float64), f_total=np.array(totals, dtype=np.int64),
        f_success=np.array(successes, dtype=np.int64), p=np.array(ps, dtype=np.float64),
    )


# =============================================================================
# META LABELS
# =============================================================================

def generate_meta_labels(per_circuit_results: Mapping[str, Tuple[Optional[int], Optional[int]]]) -> Dict[str, int]:
    """Circuit class 0 when HybNN's work is not larger than SVR's, else 1"""
    labels = {}
    for name, (hybnn_work, svr_work) in sorted(per_circuit_results.items()):
        if hybnn_work is None or svr_work is None:
            raise DataFormatError(f"Circuit '{name}' is missing a {'HybNN' if hybnn_work is None else 'SVR'} result")
        labels[name] = HYBNN_CLASS if hybnn_work <= svr_work else SVR_CLASS
    return labels


def per_net_meta_labels(hybnn_walks: NetLabelAccumulator, svr_walks: NetLabelAccumulator) -> Dict[int, int]:
    """Per-net class of the model whose walks through the net were reversed less often; ties go to HybNN"""
    hybnn_rev = hybnn_walks.reversals
    svr_rev = svr_walks.reversals
    traversed = np.flatnonzero((hybnn_walks.f_total > 0) | (svr_walks.f_total > 0))
    return {int(n): HYBNN_CLASS if hybnn_rev[n] <= svr_rev[n] else SVR_CLASS for n in traversed}


MetaKey = Tuple[str, Optional[str]]


def write_meta_labels_csv(path: Union[str, Path], labels: Mapping[MetaKey, int]) -> None:
    """circuit,class for circuit-level labels; circuit,net,class when any key names a net"""
    per_net = any(net is not None for _, net in labels)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('circuit', 'net', 'class') if per_net else ('circuit', 'class'))
        for (circuit, net), cls in sorted(labels.items(), key=lambda kv: (kv[0][0], kv[0][1] or '')):
            writer.writerow((circuit, net, cls) if per_net else (circuit, cls))


def read_meta_labels_csv(path: Union[str, Path]) -> Dict[MetaKey, int]:
    labels: Dict[MetaKey, int] = {}
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        fields = set(reader.fieldnames or ())
        if not {'circuit', 'class'} <= fields:
            raise DataFormatError(f"{path}: meta labels need 'circuit' and 'class' columns")
        for line_no, row in enumerate(reader, start=2):
            if row['class'] not in ('0', '1'):
                raise DataFormatError(f"{path}:{line_no}: class must be 0 or 1")
            labels[(row['circuit'], row.get('net') or None)] = int(row['class'])
    return labels


def meta_dataset(rows: TrainingRows, labels: Mapping[MetaKey, int]) -> Tuple[np.ndarray, np.ndarray]:
    """Extended features and classes; per-net labels take precedence over circuit labels"""
    keep, classes = [], []
    skipped = set()
    for i in range(len(rows)):
        key_net = (rows.circuit[i], rows.net[i])
        key_circuit = (rows.circuit[i], None)
        if key_net in labels:
            cls = labels[key_net]
        elif key_circuit in labels:
            cls = labels[key_circuit]
        else:
            skipped.add(rows.circuit[i])
            continue
        keep.append(i)
        classes.append(cls)
    if skipped:
        logger.warning(f"No meta label for circuits {sorted(skipped)}; their rows are left out")
    index = np.array(keep, dtype=np.int64)
    return rows.extended[index], np.array(classes, dtype=np.int64)
