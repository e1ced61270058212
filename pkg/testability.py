#!/usr/bin/env python3
"""
Testability analysis
COP and SCOAP measures over the levelized circuit and the per-net feature vectors built from them.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Mapping, Sequence, Tuple, Union

import numpy as np

from core_utils import UnsupportedGateError, ValidationError, performance_monitor
from netlist import GATE_TYPE_COUNT, Circuit, Gate, GateType, shortest_pi_distance

logger = logging.getLogger(__name__)

# Observability of nets that reach no PO/PPO
UNOBSERVABLE = 10 ** 9

BASE_FEATURE_NAMES: Tuple[str, ...] = ('cc', 'co', 'dist_norm') + tuple(f'g{i}' for i in range(GATE_TYPE_COUNT))
EXTENDED_FEATURE_NAMES: Tuple[str, ...] = BASE_FEATURE_NAMES + ('cc0', 'cc1', 'scoap_co', 'fanout')
BASE_DIM = len(BASE_FEATURE_NAMES)
EXTENDED_DIM = len(EXTENDED_FEATURE_NAMES)


def _require_logic(circuit: Circuit, gate: Gate) -> None:
    if not gate.type.is_logic:
        raise UnsupportedGateError(
            f"Gate driving '{circuit.nets[gate.output].name}' has type {gate.type.name}; "
            f"testability is undefined for it")


def _core(gate_type: GateType) -> GateType:
    """Non-inverting family of a gate type"""
    return {
        GateType.NAND: GateType.AND, GateType.NOR: GateType.OR, GateType.XNOR: GateType.XOR,
        GateType.NOT: GateType.BUF, GateType.PO: GateType.BUF, GateType.PPO: GateType.BUF,
    }.get(gate_type, gate_type)


# =============================================================================
# COP
# =============================================================================

def cop_controllability(circuit: Circuit) -> np.ndarray:
    """Probability of each net being 1 under uniform independent inputs"""
    cc = np.zeros(circuit.num_nets, dtype=np.float64)
    cc[list(circuit.sources)] = 0.5
    for gate_id in circuit.gate_order:
        gate = circuit.gates[gate_id]
        _require_logic(circuit, gate)
        ins = cc[list(gate.inputs)]
        core = _core(gate.type)
        if core == GateType.AND:
            value = float(np.prod(ins))
        elif core == GateType.OR:
            value = 1.0 - float(np.prod(1.0 - ins))
        elif core == GateType.XOR:
            value = float(ins[0])
            for p in ins[1:]:
                value = value * (1.0 - p) + p * (1.0 - value)
        else:
            value = float(ins[0])
        cc[gate.output] = 1.0 - value if gate.type.is_inverting else value
    return cc


def cop_observability(circuit: Circuit, cc: np.ndarray) -> np.ndarray:
    """Probability that a net's value propagates to a PO/PPO; fanout stems take the max branch"""
    co = np.zeros(circuit.num_nets, dtype=np.float64)
    sink_set = circuit.sink_set
    for net_id in sink_set:
        co[net_id] = 1.0

    for gate_id in reversed(circuit.gate_order):
        gate = circuit.gates[gate_id]
        _require_logic(circuit, gate)
        out_co = co[gate.output]
        core = _core(gate.type)
        for pin, net_id in enumerate(gate.inputs):
            others = [cc[n] for k, n in enumerate(gate.inputs) if k != pin]
            if core == GateType.AND:
                branch = out_co * float(np.prod(others)) if others else out_co
            elif core == GateType.OR:
                branch = out_co * float(np.prod([1.0 - p for p in others])) if others else out_co
            else:
                branch = out_co
            if net_id not in sink_set and branch > co[net_id]:
                co[net_id] = branch
    return co


# =============================================================================
# SCOAP
# =============================================================================

def scoap_controllability(circuit: Circuit) -> Tuple[np.ndarray, np.ndarray]:
    """SCOAP (CC0, CC1) with every gate contributing a depth of 1"""
    cc0 = np.ones(circuit.num_nets, dtype=np.int64)
    cc1 = np.ones(circuit.num_nets, dtype=np.int64)
    for gate_id in circuit.gate_order:
        gate = circuit.gates[gate_id]
        _require_logic(circuit, gate)
        in0 = [int(cc0[n]) for n in gate.inputs]
        in1 = [int(cc1[n]) for n in gate.inputs]
        core = _core(gate.type)
        if core == GateType.AND:
            zero, one = min(in0), sum(in1)
        elif core == GateType.OR:
            zero, one = sum(in0), min(in1)
        elif core == GateType.XOR:
            zero, one = in0[0], in1[0]
            for c0, c1 in zip(in0[1:], in1[1:]):
                zero, one = min(zero + c0, one + c1), min(one + c0, zero + c1)
        else:
            zero, one = in0[0], in1[0]
        if gate.type.is_inverting:
            zero, one = one, zero
        cc0[gate.output] = zero + 1
        cc1[gate.output] = one + 1
    return cc0, cc1


def scoap_observability(circuit: Circuit, cc0: np.ndarray, cc1: np.ndarray) -> np.ndarray:
    """SCOAP CO: 0 at POs/PPOs, min over fanout branches at stems, saturating at UNOBSERVABLE"""
    co = np.full(circuit.num_nets, UNOBSERVABLE, dtype=np.int64)
    sink_set = circuit.sink_set
    for net_id in sink_set:
        co[net_id] = 0

    for gate_id in reversed(circuit.gate_order):
        gate = circuit.gates[gate_id]
        _require_logic(circuit, gate)
        out_co = int(co[gate.output])
        core = _core(gate.type)
        for pin, net_id in enumerate(gate.inputs):
            others = [n for k, n in enumerate(gate.inputs) if k != pin]
            if core == GateType.AND:
                cost = sum(int(cc1[n]) for n in others)
            elif core == GateType.OR:
                cost = sum(int(cc0[n]) for n in others)
            elif core == GateType.XOR:
                cost = sum(min(int(cc0[n]), int(cc1[n])) for n in others)
            else:
                cost = 0
            branch = min(UNOBSERVABLE, out_co + cost + 1)
            if branch < co[net_id]:
                co[net_id] = branch
    return co


# =============================================================================
# DISTANCE AND FEATURES
# =============================================================================

def normalize_distance(distances: Union[Sequence[int], np.ndarray, Mapping[int, int]]) -> np.ndarray:
    """Min-max scale distances into [0, 1]; a constant input maps to all zeros"""
    if isinstance(distances, Mapping):
        distances = [distances[k] for k in sorted(distances)]
    values = np.asarray(distances, dtype=np.float64)
    if values.size == 0:
        raise ValidationError("normalize_distance needs at least one net")
    low, high = values.min(), values.max()
    if high == low:
        return np.zeros_like(values)
    return (values - low) / (high - low)


@dataclass(frozen=True)
class TestabilityRecord:
    """All testability measures of one net"""
    cc: float
    co: float
    cc0: int
    cc1: int
    scoap_co: int
    distance: int
    fanout: int


@dataclass(frozen=True, eq=False)
class TestabilityAnalysis:
    """Per-net arrays produced by every testability pass over one circuit"""
    cc: np.ndarray
    co: np.ndarray
    cc0: np.ndarray
    cc1: np.ndarray
    scoap_co: np.ndarray
    distance: np.ndarray
    fanout: np.ndarray

    def record(self, net_id: int) -> TestabilityRecord:
        return TestabilityRecord(
            cc=float(self.cc[net_id]), co=float(self.co[net_id]),
            cc0=int(self.cc0[net_id]), cc1=int(self.cc1[net_id]),
            scoap_co=int(self.scoap_co[net_id]), distance=int(self.distance[net_id]),
            fanout=int(self.fanout[net_id]),
        )


@performance_monitor("testability.analyze")
def analyze(circuit: Circuit) -> TestabilityAnalysis:
    """Run COP, SCOAP and distance passes"""
    cc = cop_controllability(circuit)
    co = cop_observability(circuit, cc)
    cc0, cc1 = scoap_controllability(circuit)
    scoap_co = scoap_observability(circuit, cc0, cc1)
    analysis = TestabilityAnalysis(
        cc=cc, co=co, cc0=cc0, cc1=cc1, scoap_co=scoap_co,
        distance=shortest_pi_distance(circuit),
        fanout=np.array([net.fanout_count for net in circuit.nets], dtype=np.int64),
    )
    for array in (analysis.cc, analysis.co, analysis.cc0, analysis.cc1, analysis.scoap_co):
        array.setflags(write=False)
    return analysis


@dataclass(frozen=True)
class FeatureVector:
    """Base (17) and extended (21) features of one net"""
    base: np.ndarray
    extended: np.ndarray


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Feature matrices of a circuit, one row per net id"""
    net_names: Tuple[str, ...]
    base: np.ndarray
    extended: np.ndarray

    def __len__(self) -> int:
        return len(self.net_names)

    def __getitem__(self, net_id: int) -> FeatureVector:
        return FeatureVector(base=self.base[net_id], extended=self.extended[net_id])

    def __iter__(self) -> Iterator[FeatureVector]:
        return (self[i] for i in range(len(self)))


def build_features(circuit: Circuit, analysis: TestabilityAnalysis) -> FeatureTable:
    """Assemble [cc, co, dist_norm, one-hot(14)] and append [cc0, cc1, scoap_co, fanout]"""
    n = circuit.num_nets
    arrays = (analysis.cc, analysis.co, analysis.cc0, analysis.cc1, analysis.scoap_co, analysis.distance)
    if any(len(a) != n for a in arrays):
        raise ValidationError(f"Testability data does not cover the {n} nets of '{circuit.name}'")

    one_hot = np.zeros((n, GATE_TYPE_COUNT), dtype=np.float64)
    for net in circuit.nets:
        one_hot[net.id, circuit.driver_type(net.id).value] = 1.0

    base = np.column_stack([analysis.cc, analysis.co, normalize_distance(analysis.distance), one_hot])
    extended = np.column_stack([
        base,
        analysis.cc0.astype(np.float64), analysis.cc1.astype(np.float64),
        analysis.scoap_co.astype(np.float64), analysis.fanout.astype(np.float64),
    ])
    return FeatureTable(net_names=tuple(net.name for net in circuit.nets), base=base, extended=extended)


def feature_rows(table: FeatureTable) -> List[List[str]]:
    """CSV rows (without header) in net-id order"""
    rows = []
    for name, row in zip(table.net_names, table.extended):
        rows.append([name] + [_format_feature(v) for v in row])
    return rows


def _format_feature(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def write_features_csv(path: Union[str, Path], table: FeatureTable) -> None:
    """Feature dump: net,cc,co,dist_norm,g0..g13,cc0,cc1,scoap_co,fanout"""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('net',) + EXTENDED_FEATURE_NAMES)
        writer.writerows(feature_rows(table))
