#!/usr/bin/env python3
"""
PODEM test generation
Path-oriented decision making over PI assignments with pluggable backtrace heuristics
and backtrace/backtrack accounting.
"""

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from core_utils import DataFormatError, EngineStateError, InvariantViolation, ValidationError, performance_monitor
from fault_list import Fault, FaultStatus
from logic_sim import D, DBAR, ONE, X, ZERO, ValueState, fill_vector, imply, simulate_two_valued
from netlist import Circuit, GateType

logger = logging.getLogger(__name__)

DEFAULT_BACKTRACK_LIMIT = 10_000


# =============================================================================
# HEURISTICS
# =============================================================================

class BacktraceHeuristic(Protocol):
    """Scores candidate X inputs during backtrace; the highest score wins"""
    name: str

    def score(self, net: int, required: int) -> float:
        ...


@dataclass(frozen=True, eq=False)
class CopHeuristic:
    """COP baseline: cc for inputs that must become 1, 1 - cc for inputs that must become 0"""
    cc: np.ndarray
    name: str = "cop"

    def score(self, net: int, required: int) -> float:
        p = float(self.cc[net])
        return p if required == 1 else 1.0 - p


@dataclass(frozen=True, eq=False)
class StaticScoreHeuristic:
    """Per-net scores computed once per circuit, independent of the required value"""
    scores: np.ndarray
    name: str = "static"

    def __post_init__(self):
        if not np.all(np.isfinite(self.scores)):
            raise ValidationError(f"Heuristic '{self.name}' has non-finite scores")

    def score(self, net: int, required: int) -> float:
        return float(self.scores[net])


@dataclass(frozen=True, eq=False)
class AffineHeuristic:
    """scale * inner + offset; a positive scale keeps every backtrace choice unchanged"""
    inner: Any
    scale: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValidationError(f"Affine heuristic scale must be positive, got {self.scale}")

    @property
    def name(self) -> str:
        return f"affine({self.inner.name})"

    def score(self, net: int, required: int) -> float:
        return self.scale * self.inner.score(net, required) + self.offset


def cop_baseline_heuristic(circuit: Circuit, testability) -> CopHeuristic:
    """Baseline heuristic over COP controllability"""
    cc = np.asarray(testability.cc, dtype=np.float64)
    if len(cc) != circuit.num_nets:
        raise ValidationError(f"COP data covers {len(cc)} nets, circuit '{circuit.name}' has {circuit.num_nets}")
    return CopHeuristic(cc=cc)


# =============================================================================
# RESULTS
# =============================================================================

class Outcome(Enum):
    DETECTED = "DETECTED"
    UNTESTABLE = "UNTESTABLE"
    ABORTED = "ABORTED"


_STATUS_OF = {
    Outcome.DETECTED: FaultStatus.DETECTED,
    Outcome.UNTESTABLE: FaultStatus.UNTESTABLE,
    Outcome.ABORTED: FaultStatus.ABORTED,
}


@dataclass(frozen=True)
class DecisionRecord:
    """One backtrace walk and the PI decision it produced"""
    pi: int
    value: int
    path: Tuple[int, ...]
    reversed: bool


@dataclass(frozen=True)
class AtpgResult:
    """Outcome of PODEM on one fault"""
    fault: Fault
    outcome: Outcome
    vector: Optional[Dict[int, int]]
    backtraces: int
    backtracks: int
    decisions: int
    elapsed: float
    decision_log: Optional[Tuple[DecisionRecord, ...]] = None

    @property
    def work(self) -> int:
        return self.backtraces + self.backtracks

    def filled_vector(self, circuit: Circuit, fill: int = 0) -> Optional[Dict[int, int]]:
        if self.vector is None:
            return None
        return fill_vector(circuit, self.vector, fill)


@dataclass(frozen=True)
class BacktraceResult:
    pi: int
    value: int
    path: Tuple[int, ...]


# =============================================================================
# BACKTRACE AND OBJECTIVES
# =============================================================================

def _good_bit(value: int) -> int:
    return 1 if value in (ONE, D) else 0


_AND_FAMILY = (GateType.AND, GateType.NAND)
_OR_FAMILY = (GateType.OR, GateType.NOR)
_XOR_FAMILY = (GateType.XOR, GateType.XNOR)


def backtrace(circuit: Circuit, state: ValueState, objective: Tuple[int, int],
              heuristic: BacktraceHeuristic) -> BacktraceResult:
    """
    Walk an objective (net, value) back to an unassigned PI/PPI

    At every gate only X inputs are candidates; the highest heuristic score wins
    and equal scores go to the lowest net id.

    Raises:
        EngineStateError: the objective net is already assigned or a gate on the walk has no X input
    """
    net, value = objective
    values = state.values
    if values[net] != X:
        raise EngineStateError(f"Backtrace objective '{circuit.nets[net].name}' is already {values[net]}")

    path = [net]
    while net not in circuit.source_set:
        gate = circuit.gates[circuit.nets[net].driver]
        core_value = value ^ 1 if gate.type.is_inverting else value
        candidates = sorted({i for i in gate.inputs if values[i] == X})
        if not candidates:
            raise EngineStateError(f"Gate driving '{circuit.nets[net].name}' has no X input to backtrace through")

        if gate.type in _XOR_FAMILY:
            def required_for(candidate: int) -> int:
                parity = 0
                for other in gate.inputs:
                    if other != candidate:
                        parity ^= _good_bit(values[other])
                return core_value ^ parity
        else:
            def required_for(candidate: int) -> int:
                return core_value

        best, best_value, best_score = None, 0, None
        for candidate in candidates:
            required = required_for(candidate)
            score = heuristic.score(candidate, required)
            if best_score is None or score > best_score:
                best, best_value, best_score = candidate, required, score
        net, value = best, best_value
        path.append(net)

    return BacktraceResult(pi=net, value=value, path=tuple(path))


def _non_controlling(gate_type: GateType) -> int:
    if gate_type in _AND_FAMILY:
        return 1
    return 0


def select_objective(circuit: Circuit, state: ValueState, fault: Fault) -> Tuple[int, int]:
    """Activate the fault, else advance the lowest-level D-frontier gate through its lowest-id X input"""
    if state.values[fault.net] == X:
        return fault.net, 1 - fault.stuck_at
    if not state.d_frontier:
        raise EngineStateError("No objective: fault activated and D-frontier empty")
    levels = circuit.levels
    gate_id = min(state.d_frontier, key=lambda g: (levels[circuit.gates[g].output], g))
    gate = circuit.gates[gate_id]
    x_inputs = [i for i in gate.inputs if state.values[i] == X]
    if not x_inputs:
        raise EngineStateError(f"D-frontier gate {gate_id} has no X input")
    return min(x_inputs), _non_controlling(gate.type)


def _failed(circuit: Circuit, state: ValueState, fault: Fault) -> bool:
    site = state.values[fault.net]
    if site in (ZERO, ONE):
        return True
    if site in (D, DBAR) and not state.d_frontier and not state.error_at(circuit.sinks):
        return True
    return False


# =============================================================================
# SEARCH
# =============================================================================

@dataclass
class _Decision:
    pi: int
    value: int
    flipped: bool = False
    record: Optional[int] = None


def _validate_detection(circuit: Circuit, fault: Fault, vector: Dict[int, int]) -> None:
    filled = fill_vector(circuit, vector, 0)
    good = simulate_two_valued(circuit, filled)
    bad = simulate_two_valued(circuit, filled, fault)
    if not any(good[n] != bad[n] for n in circuit.sinks):
        raise InvariantViolation(
            f"Vector reported for {fault.label(circuit)} does not detect it under two-valued simulation")


def generate_test(circuit: Circuit, fault: Fault, heuristic: BacktraceHeuristic,
                  backtrack_limit: Optional[int] = DEFAULT_BACKTRACK_LIMIT,
                  record_decisions: bool = False) -> AtpgResult:
    """
    Run PODEM for one fault

    Args:
        circuit: Levelized circuit
        fault: Target stuck-at fault
        heuristic: Backtrace input selection
        backtrack_limit: Abort once backtracks exceed this; None searches exhaustively
        record_decisions: Keep every backtrace walk and whether its decision was reversed

    Returns:
        AtpgResult with counters; DETECTED vectors are checked by two-valued simulation
    """
    if not 0 <= fault.net < circuit.num_nets:
        raise ValidationError(f"Fault net {fault.net} does not exist in '{circuit.name}'")
    if backtrack_limit is not None and backtrack_limit < 0:
        raise ValidationError(f"backtrack_limit must be non-negative, got {backtrack_limit}")

    fault = replace(fault, status=FaultStatus.UNTRIED)
    start = time.perf_counter()
    state = ValueState.initial(circuit, fault)
    stack: List[_Decision] = []
    log: List[Dict[str, Any]] = []
    backtraces = backtracks = decisions = 0
    outcome: Optional[Outcome] = None

    while outcome is None:
        if state.error_at(circuit.sinks):
            outcome = Outcome.DETECTED
            break

        if _failed(circuit, state, fault):
            while stack and stack[-1].flipped:
                undone = stack.pop()
                imply(circuit, state, fault, (undone.pi, X))
            if not stack:
                outcome = Outcome.UNTESTABLE
                break
            backtracks += 1
            if backtrack_limit is not None and backtracks > backtrack_limit:
                outcome = Outcome.ABORTED
                break
            top = stack[-1]
            top.flipped = True
            top.value ^= 1
            if top.record is not None:
                log[top.record]['reversed'] = True
            imply(circuit, state, fault, (top.pi, top.value))
            continue

        objective = select_objective(circuit, state, fault)
        walk = backtrace(circuit, state, objective, heuristic)
        backtraces += 1
        decisions += 1
        decision = _Decision(pi=walk.pi, value=walk.value)
        if record_decisions:
            decision.record = len(log)
            log.append({'pi': walk.pi, 'value': walk.value, 'path': walk.path, 'reversed': False})
        stack.append(decision)
        imply(circuit, state, fault, (walk.pi, walk.value))

    vector = None
    if outcome is Outcome.DETECTED:
        vector = {n: state.values[n] if state.values[n] in (ZERO, ONE) else X for n in circuit.sources}
        if fault.net in circuit.source_set:
            vector[fault.net] = 1 - fault.stuck_at
        _validate_detection(circuit, fault, vector)

    result = AtpgResult(
        fault=fault.with_status(_STATUS_OF[outcome]),
        outcome=outcome,
        vector=vector,
        backtraces=backtraces,
        backtracks=backtracks,
        decisions=decisions,
        elapsed=time.perf_counter() - start,
        decision_log=tuple(DecisionRecord(**entry) for entry in log) if record_decisions else None,
    )
    logger.debug(f"{fault.label(circuit)}: {outcome.value} backtraces={backtraces} backtracks={backtracks}")
    return result


# =============================================================================
# CAMPAIGNS
# =============================================================================

@dataclass(frozen=True)
class CampaignReport:
    """Per-fault results of one heuristic on one circuit, in fault-list order"""
    circuit_name: str
    heuristic: str
    backtrack_limit: Optional[int]
    results: Tuple[AtpgResult, ...] = field(default_factory=tuple)

    @property
    def total(self) -> int:
        return len(self.results)

    def _count(self, outcome: Outcome) -> int:
        return sum(1 for r in self.results if r.outcome is outcome)

    @property
    def detected(self) -> int:
        return self._count(Outcome.DETECTED)

    @property
    def untestable(self) -> int:
        return self._count(Outcome.UNTESTABLE)

    @property
    def aborted(self) -> int:
        return self._count(Outcome.ABORTED)

    @property
    def backtraces(self) -> int:
        return sum(r.backtraces for r in self.results)

    @property
    def backtracks(self) -> int:
        return sum(r.backtracks for r in self.results)

    @property
    def work(self) -> int:
        return self.backtraces + self.backtracks

    @property
    def zero_denominator(self) -> bool:
        return self.total == 0

    @property
    def coverage_percent(self) -> float:
        """Detected over all faults; aborted faults count as undetected"""
        return 100.0 if self.total == 0 else 100.0 * self.detected / self.total

    @property
    def elapsed(self) -> float:
        return sum(r.elapsed for r in self.results)

    def summary(self) -> Dict[str, Any]:
        return {
            'circuit': self.circuit_name,
            'heuristic': self.heuristic,
            'backtrack_limit': self.backtrack_limit,
            'faults': self.total,
            'detected': self.detected,
            'untestable': self.untestable,
            'aborted': self.aborted,
            'coverage_percent': round(self.coverage_percent, 6),
            'zero_denominator': self.zero_denominator,
            'backtraces': self.backtraces,
            'backtracks': self.backtracks,
            'work': self.work,
            'elapsed_s': round(self.elapsed, 6),
        }

    def vectors(self, circuit: Circuit, fill: int = 0) -> List[Dict[int, int]]:
        """Complete vectors of all detected faults, in fault-list order"""
        return [r.filled_vector(circuit, fill) for r in self.results if r.vector is not None]


_WORKER: Dict[str, Any] = {}


def _init_worker(circuit: Circuit, heuristic: BacktraceHeuristic, backtrack_limit: Optional[int],
                 record_decisions: bool) -> None:
    _WORKER.update(circuit=circuit, heuristic=heuristic, backtrack_limit=backtrack_limit,
                   record_decisions=record_decisions)


def _worker_generate(fault: Fault) -> AtpgResult:
    return generate_test(_WORKER['circuit'], fault, _WORKER['heuristic'],
                         _WORKER['backtrack_limit'], _WORKER['record_decisions'])


@performance_monitor("podem_engine.run_campaign")
def run_campaign(circuit: Circuit, faults: Sequence[Fault], heuristic: BacktraceHeuristic,
                 backtrack_limit: Optional[int] = DEFAULT_BACKTRACK_LIMIT, jobs: int = 1,
                 record_decisions: bool = False) -> CampaignReport:
    """Run PODEM on every fault; results keep fault-list order for any job count"""
    if jobs < 1:
        raise ValidationError(f"jobs must be positive, got {jobs}")
    if not faults:
        logger.warning(f"Empty fault list for '{circuit.name}'; coverage reported as 100%")

    if jobs == 1 or len(faults) < 2:
        results = [generate_test(circuit, f, heuristic, backtrack_limit, record_decisions) for f in faults]
    else:
        chunk = max(1, len(faults) // (jobs * 4))
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(circuit, heuristic, backtrack_limit, record_decisions)) as pool:
            results = list(pool.map(_worker_generate, faults, chunksize=chunk))

    report = CampaignReport(circuit_name=circuit.name, heuristic=heuristic.name,
                            backtrack_limit=backtrack_limit, results=tuple(results))
    logger.info(f"{circuit.name} [{heuristic.name}]: {report.detected}/{report.total} detected, "
                f"{report.aborted} aborted, backtraces={report.backtraces} backtracks={report.backtracks}")
    return report


# =============================================================================
# REPORTS
# =============================================================================

CAMPAIGN_CSV_HEADER = ('fault_net', 'stuck_at', 'outcome', 'backtraces', 'backtracks', 'elapsed_us')


def write_campaign_csv(path: Union[str, Path], circuit: Circuit, report: CampaignReport) -> None:
    """Per-fault rows followed by a '#'-prefixed JSON summary line"""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CAMPAIGN_CSV_HEADER)
        for r in report.results:
            writer.writerow([circuit.nets[r.fault.net].name, r.fault.stuck_at, r.outcome.value,
                             r.backtraces, r.backtracks, int(round(r.elapsed * 1e6))])
        f.write("# " + json.dumps(report.summary(), sort_keys=True) + "\n")


@dataclass(frozen=True)
class CampaignSummary:
    """Totals read back from a campaign CSV"""
    circuit: str
    heuristic: str
    faults: int
    detected: int
    aborted: int
    backtraces: int
    backtracks: int

    @property
    def work(self) -> int:
        return self.backtraces + self.backtracks

    @property
    def coverage_percent(self) -> float:
        return 100.0 if self.faults == 0 else 100.0 * self.detected / self.faults


def read_campaign_summary(path: Union[str, Path]) -> CampaignSummary:
    """Recompute totals from the rows; circuit and heuristic names come from the summary line"""
    meta: Dict[str, Any] = {}
    faults = detected = aborted = backtraces = backtracks = 0
    with open(path, newline='', encoding='utf-8') as f:
        lines = f.read().splitlines()
    if not lines or tuple(lines[0].split(',')) != CAMPAIGN_CSV_HEADER:
        raise DataFormatError(f"{path}: not a campaign report")
    for line_no, line in enumerate(lines[1:], start=2):
        if line.startswith('#'):
            try:
                meta.update(json.loads(line[1:].strip()))
            except json.JSONDecodeError as e:
                raise DataFormatError(f"{path}:{line_no}: bad summary block: {e}") from None
            continue
        if not line.strip():
            continue
        row = next(csv.reader([line]))
        if len(row) != len(CAMPAIGN_CSV_HEADER):
            raise DataFormatError(f"{path}:{line_no}: expected {len(CAMPAIGN_CSV_HEADER)} fields")
        try:
            outcome = Outcome(row[2])
            backtraces += int(row[3])
            backtracks += int(row[4])
        except ValueError as e:
            raise DataFormatError(f"{path}:{line_no}: {e}") from None
        faults += 1
        detected += outcome is Outcome.DETECTED
        aborted += outcome is Outcome.ABORTED
    return CampaignSummary(
        circuit=str(meta.get('circuit', Path(path).stem)),
        heuristic=str(meta.get('heuristic', 'unknown')),
        faults=faults, detected=detected, aborted=aborted,
        backtraces=backtraces, backtracks=backtracks,
    )


@dataclass(frozen=True)
class ComparisonRow:
    """One circuit in a side-by-side comparison; a or b is None when that side is missing"""
    circuit: str
    a: Optional[CampaignSummary]
    b: Optional[CampaignSummary]

    @property
    def missing(self) -> bool:
        return self.a is None or self.b is None

    @property
    def work_ratio(self) -> Optional[float]:
        """work(A) / work(B); 1.0 when both are zero"""
        if self.missing:
            return None
        if self.b.work == 0:
            return 1.0 if self.a.work == 0 else float('inf')
        return self.a.work / self.b.work


def compare_campaigns(a: Sequence[CampaignSummary], b: Sequence[CampaignSummary]) -> List[ComparisonRow]:
    """Pair summaries by circuit name, sorted by name"""
    by_a = {s.circuit: s for s in a}
    by_b = {s.circuit: s for s in b}
    rows = [ComparisonRow(circuit=name, a=by_a.get(name), b=by_b.get(name))
            for name in sorted(set(by_a) | set(by_b))]
    for row in rows:
        if row.missing:
            logger.warning(f"Circuit '{row.circuit}' is missing from report set {'A' if row.a is None else 'B'}")
    return rows


COMPARISON_CSV_HEADER = ('circuit', 'coverage_a', 'coverage_b', 'backtraces_a', 'backtraces_b',
                         'backtracks_a', 'backtracks_b', 'work_a', 'work_b', 'work_ratio', 'flag')


def write_comparison_csv(path: Union[str, Path], rows: Sequence[ComparisonRow]) -> None:
    def cells(s: Optional[CampaignSummary]) -> Tuple[str, str, str, str]:
        if s is None:
            return '', '', '', ''
        return f"{s.coverage_percent:.4f}", str(s.backtraces), str(s.backtracks), str(s.work)

    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(COMPARISON_CSV_HEADER)
        for row in rows:
            ca, cb = cells(row.a), cells(row.b)
            ratio = row.work_ratio
            writer.writerow([row.circuit, ca[0], cb[0], ca[1], cb[1], ca[2], cb[2], ca[3], cb[3],
                             '' if ratio is None else f"{ratio:.6f}", 'MISSING' if row.missing else ''])
