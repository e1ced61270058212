#!/usr/bin/env python3
"""
Five-valued logic simulation
D-calculus gate evaluation, event-driven implication for PODEM, and serial fault simulation.
"""

import csv
import heapq
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from core_utils import DataFormatError, UnsupportedGateError, ValidationError, VectorError, performance_monitor
from fault_list import Fault
from netlist import Circuit, GateType

logger = logging.getLogger(__name__)


class LogicValue(IntEnum):
    """D-calculus values; D is good 1 / faulty 0, DBAR is good 0 / faulty 1"""
    ZERO = 0
    ONE = 1
    X = 2
    D = 3
    DBAR = 4

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]

    @property
    def is_error(self) -> bool:
        return self in (LogicValue.D, LogicValue.DBAR)

    @classmethod
    def from_bit(cls, bit: Optional[int]) -> "LogicValue":
        if bit is None:
            return cls.X
        return cls.ONE if bit else cls.ZERO


_SYMBOLS = {LogicValue.ZERO: '0', LogicValue.ONE: '1', LogicValue.X: 'X', LogicValue.D: 'D', LogicValue.DBAR: "D'"}

ZERO, ONE, X, D, DBAR = 0, 1, 2, 3, 4
_ERROR_VALUES = (D, DBAR)

# (good, faulty) components; 2 stands for an unknown component
_PAIR = {ZERO: (0, 0), ONE: (1, 1), X: (2, 2), D: (1, 0), DBAR: (0, 1)}
_FROM_PAIR = {(0, 0): ZERO, (1, 1): ONE, (1, 0): D, (0, 1): DBAR}


def _and3(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return 1 if a == 1 and b == 1 else 2


def _or3(a: int, b: int) -> int:
    if a == 1 or b == 1:
        return 1
    return 0 if a == 0 and b == 0 else 2


def _xor3(a: int, b: int) -> int:
    return 2 if a == 2 or b == 2 else a ^ b


def _pairwise_table(op) -> Tuple[Tuple[int, ...], ...]:
    rows = []
    for a in range(5):
        row = []
        for b in range(5):
            (ga, fa), (gb, fb) = _PAIR[a], _PAIR[b]
            row.append(_FROM_PAIR.get((op(ga, gb), op(fa, fb)), X))
        rows.append(tuple(row))
    return tuple(rows)


AND_TABLE = _pairwise_table(_and3)
OR_TABLE = _pairwise_table(_or3)
XOR_TABLE = _pairwise_table(_xor3)
NOT_TABLE = (ONE, ZERO, X, DBAR, D)

_FOLD_TABLE = {
    GateType.AND: AND_TABLE, GateType.NAND: AND_TABLE,
    GateType.OR: OR_TABLE, GateType.NOR: OR_TABLE,
    GateType.XOR: XOR_TABLE, GateType.XNOR: XOR_TABLE,
}
_PASS_THROUGH = (GateType.BUF, GateType.PO, GateType.PPO)


def _evaluate(gate_type: GateType, values: Sequence[int]) -> int:
    if gate_type in _PASS_THROUGH:
        return values[0]
    if gate_type == GateType.NOT:
        return NOT_TABLE[values[0]]
    table = _FOLD_TABLE.get(gate_type)
    if table is None:
        raise UnsupportedGateError(f"Gate type {gate_type.name} has no evaluation semantics")
    result = values[0]
    for value in values[1:]:
        result = table[result][value]
    return NOT_TABLE[result] if gate_type.is_inverting else result


def eval_gate(gate_type: GateType, inputs: Sequence[Union[LogicValue, int]]) -> LogicValue:
    """Five-valued evaluation of one gate"""
    if not inputs:
        raise ValidationError(f"{gate_type.name} evaluated with no inputs")
    return LogicValue(_evaluate(gate_type, [int(v) for v in inputs]))


def _inject(value: int, fault: Fault) -> int:
    """Apply the stuck-at override at the fault site"""
    if value == X:
        return X
    good = 1 if value in (ONE, D) else 0
    if good == fault.stuck_at:
        return ONE if good else ZERO
    return D if fault.stuck_at == 0 else DBAR


# =============================================================================
# IMPLICATION
# =============================================================================

@dataclass
class ValueState:
    """Per-net values plus the D-frontier for one fault"""
    values: List[int]
    d_frontier: Set[int] = field(default_factory=set)
    fault: Optional[Fault] = None

    @classmethod
    def initial(cls, circuit: Circuit, fault: Optional[Fault] = None) -> "ValueState":
        return cls(values=[X] * circuit.num_nets, d_frontier=set(), fault=fault)

    def value(self, net_id: int) -> LogicValue:
        return LogicValue(self.values[net_id])

    def copy(self) -> "ValueState":
        return ValueState(values=list(self.values), d_frontier=set(self.d_frontier), fault=self.fault)

    def error_at(self, nets: Sequence[int]) -> bool:
        values = self.values
        return any(values[n] in _ERROR_VALUES for n in nets)


def _update_frontier(state: ValueState, gate_id: int, out: int, ins: Sequence[int]) -> None:
    if out == X and any(v in _ERROR_VALUES for v in ins):
        state.d_frontier.add(gate_id)
    else:
        state.d_frontier.discard(gate_id)


def imply(circuit: Circuit, state: ValueState, fault: Optional[Fault],
          assignment: Tuple[int, Union[LogicValue, int]]) -> ValueState:
    """
    Assign a PI/PPI and propagate forward to fixpoint (event-driven, level-ordered)

    The state is updated in place and returned.
    """
    net_id, raw_value = assignment
    value = int(raw_value)
    if net_id not in circuit.source_set:
        raise ValidationError(f"Net '{circuit.nets[net_id].name}' is not a primary or pseudo-primary input")
    if value not in (ZERO, ONE, X):
        raise ValidationError(f"Inputs can only be assigned 0, 1 or X, got {LogicValue(value).name}")

    values = state.values
    if fault is not None and fault.net == net_id:
        value = _inject(value, fault)
    if values[net_id] == value:
        return state
    values[net_id] = value

    nets = circuit.nets
    gates = circuit.gates
    levels = circuit.levels
    queue: List[Tuple[int, int]] = []
    queued: Set[int] = set()

    def schedule(changed: int) -> None:
        for gate_id, _ in nets[changed].fanout_branches:
            if gate_id not in queued:
                queued.add(gate_id)
                heapq.heappush(queue, (levels[gates[gate_id].output], gate_id))

    schedule(net_id)
    while queue:
        _, gate_id = heapq.heappop(queue)
        queued.discard(gate_id)
        gate = gates[gate_id]
        ins = [values[i] for i in gate.inputs]
        out = _evaluate(gate.type, ins)
        if fault is not None and gate.output == fault.net:
            out = _inject(out, fault)
        _update_frontier(state, gate_id, out, ins)
        if out != values[gate.output]:
            values[gate.output] = out
            schedule(gate.output)
    return state


def evaluate_full(circuit: Circuit, fault: Optional[Fault],
                  assignments: Mapping[int, Union[LogicValue, int]]) -> ValueState:
    """Non-incremental five-valued evaluation of every net (unassigned sources are X)"""
    state = ValueState.initial(circuit, fault)
    values = state.values
    for net_id in circuit.sources:
        value = int(assignments.get(net_id, X))
        if fault is not None and fault.net == net_id:
            value = _inject(value, fault)
        values[net_id] = value
    for gate_id in circuit.gate_order:
        gate = circuit.gates[gate_id]
        ins = [values[i] for i in gate.inputs]
        out = _evaluate(gate.type, ins)
        if fault is not None and gate.output == fault.net:
            out = _inject(out, fault)
        _update_frontier(state, gate_id, out, ins)
        values[gate.output] = out
    return state


# =============================================================================
# TWO-VALUED SIMULATION
# =============================================================================

def _bool_gate(gate_type: GateType, ins: Sequence[bool]) -> bool:
    if gate_type in (GateType.AND, GateType.NAND):
        result = all(ins)
    elif gate_type in (GateType.OR, GateType.NOR):
        result = any(ins)
    elif gate_type in (GateType.XOR, GateType.XNOR):
        result = sum(ins) % 2 == 1
    elif gate_type in _PASS_THROUGH or gate_type == GateType.NOT:
        result = ins[0]
    else:
        raise UnsupportedGateError(f"Gate type {gate_type.name} has no evaluation semantics")
    return not result if gate_type.is_inverting else result


def _check_complete(circuit: Circuit, vector: Mapping[int, int]) -> None:
    for net_id in circuit.sources:
        bit = vector.get(net_id)
        if bit not in (0, 1):
            raise VectorError(f"Input '{circuit.nets[net_id].name}' is not assigned 0/1 (got {bit!r})")


def simulate_two_valued(circuit: Circuit, vector: Mapping[int, int], fault: Optional[Fault] = None) -> List[bool]:
    """Boolean simulation of the good machine, or of the faulty machine when a fault is given"""
    _check_complete(circuit, vector)
    values = [False] * circuit.num_nets
    for net_id in circuit.sources:
        values[net_id] = bool(vector[net_id])
    if fault is not None and fault.net in circuit.source_set:
        values[fault.net] = bool(fault.stuck_at)
    for gate_id in circuit.gate_order:
        gate = circuit.gates[gate_id]
        values[gate.output] = _bool_gate(gate.type, [values[i] for i in gate.inputs])
        if fault is not None and gate.output == fault.net:
            values[gate.output] = bool(fault.stuck_at)
    return values


def simulate_patterns(circuit: Circuit, patterns: np.ndarray, fault: Optional[Fault] = None) -> np.ndarray:
    """
    Two-valued simulation of many patterns at once

    Args:
        circuit: Circuit to simulate
        patterns: Boolean array (n_patterns, n_sources) in circuit.sources order
        fault: Simulate the faulty machine instead of the good one

    Returns:
        Boolean array (n_patterns, n_nets)
    """
    patterns = np.asarray(patterns, dtype=bool)
    if patterns.ndim != 2 or patterns.shape[1] != len(circuit.sources):
        raise VectorError(f"Expected patterns of shape (n, {len(circuit.sources)}), got {patterns.shape}")
    values = np.zeros((patterns.shape[0], circuit.num_nets), dtype=bool)
    values[:, list(circuit.sources)] = patterns
    if fault is not None and fault.net in circuit.source_set:
        values[:, fault.net] = bool(fault.stuck_at)
    for gate_id in circuit.gate_order:
        gate = circuit.gates[gate_id]
        ins = values[:, list(gate.inputs)]
        kind = gate.type
        if kind in (GateType.AND, GateType.NAND):
            out = np.logical_and.reduce(ins, axis=1)
        elif kind in (GateType.OR, GateType.NOR):
            out = np.logical_or.reduce(ins, axis=1)
        elif kind in (GateType.XOR, GateType.XNOR):
            out = np.logical_xor.reduce(ins, axis=1)
        elif kind in _PASS_THROUGH or kind == GateType.NOT:
            out = ins[:, 0]
        else:
            raise UnsupportedGateError(f"Gate type {kind.name} has no evaluation semantics")
        values[:, gate.output] = ~out if kind.is_inverting else out
        if fault is not None and gate.output == fault.net:
            values[:, gate.output] = bool(fault.stuck_at)
    return values


def exhaustive_patterns(n_sources: int) -> np.ndarray:
    """All 2^n input combinations as a boolean matrix, first source as the most significant bit"""
    codes = np.arange(2 ** n_sources, dtype=np.int64)
    shifts = np.arange(n_sources - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(bool)


# =============================================================================
# FAULT SIMULATION
# =============================================================================

def fill_vector(circuit: Circuit, partial: Mapping[int, Union[LogicValue, int]], fill: int = 0) -> Dict[int, int]:
    """Complete a test cube: X (or missing) sources take the fill bit"""
    vector = {}
    for net_id in circuit.sources:
        value = int(partial.get(net_id, X))
        vector[net_id] = value if value in (ZERO, ONE) else fill
    return vector


@dataclass(frozen=True)
class CoverageEntry:
    """Detection outcome of one fault"""
    fault: Fault
    detected: bool
    vector_index: Optional[int] = None


@dataclass(frozen=True)
class CoverageReport:
    """Serial fault-simulation outcome over a vector set"""
    entries: Tuple[CoverageEntry, ...]

    @property
    def total(self) -> int:
        return len(self.entries)

    @property
    def detected(self) -> int:
        return sum(1 for entry in self.entries if entry.detected)

    @property
    def coverage_percent(self) -> float:
        return 100.0 if self.total == 0 else 100.0 * self.detected / self.total

    def undetected_faults(self) -> List[Fault]:
        return [entry.fault for entry in self.entries if not entry.detected]


def detects(circuit: Circuit, vector: Mapping[int, int], fault: Fault) -> bool:
    """True when the complete vector drives D/DBAR onto a PO or PPO"""
    _check_complete(circuit, vector)
    state = evaluate_full(circuit, fault, vector)
    return state.error_at(circuit.sinks)


@performance_monitor("logic_sim.fault_simulate")
def fault_simulate(circuit: Circuit, vectors: Sequence[Mapping[int, int]], faults: Sequence[Fault]) -> CoverageReport:
    """Serial fault simulation: each fault against vectors until the first detection"""
    for vector in vectors:
        _check_complete(circuit, vector)

    entries = []
    for fault in faults:
        hit = None
        for index, vector in enumerate(vectors):
            if evaluate_full(circuit, fault, vector).error_at(circuit.sinks):
                hit = index
                break
        entries.append(CoverageEntry(fault=fault, detected=hit is not None, vector_index=hit))

    report = CoverageReport(entries=tuple(entries))
    logger.debug(f"Fault simulation of {circuit.name}: {report.detected}/{report.total} detected "
                 f"with {len(vectors)} vectors")
    return report


# =============================================================================
# CSV INTERFACES
# =============================================================================

def write_vectors_csv(path: Union[str, Path], circuit: Circuit, vectors: Sequence[Mapping[int, int]]) -> None:
    """Write complete 0/1 vectors with header vector_id,<input names>"""
    names = [circuit.nets[n].name for n in circuit.sources]
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['vector_id'] + names)
        for index, vector in enumerate(vectors):
            _check_complete(circuit, vector)
            writer.writerow([index] + [int(vector[n]) for n in circuit.sources])


def read_vectors_csv(path: Union[str, Path], circuit: Circuit) -> List[Dict[int, int]]:
    """Read vectors written by write_vectors_csv; every input must have a column"""
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0] != 'vector_id':
            raise DataFormatError(f"{path}: expected header starting with 'vector_id'")
        columns = [circuit.net_id(name) for name in header[1:]]
        missing = set(circuit.sources) - set(columns)
        if missing:
            names = ", ".join(sorted(circuit.nets[n].name for n in missing))
            raise VectorError(f"{path}: no column for inputs {names}")
        vectors = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            try:
                vectors.append({net: int(bit) for net, bit in zip(columns, row[1:])})
            except ValueError:
                raise DataFormatError(f"{path}:{line_no}: vector values must be 0 or 1") from None
    return vectors


def write_coverage_csv(path: Union[str, Path], circuit: Circuit, report: CoverageReport) -> None:
    """Write fault_net,stuck_at,status rows plus a summary line"""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['fault_net', 'stuck_at', 'status'])
        for entry in report.entries:
            status = 'DETECTED' if entry.detected else 'UNDETECTED'
            writer.writerow([circuit.nets[entry.fault.net].name, entry.fault.stuck_at, status])
        f.write(f"# summary: detected={report.detected} total={report.total} "
                f"coverage={report.coverage_percent:.4f}\n")
