#!/usr/bin/env python3
"""
Brute-force reference checks
Exhaustive and sampling oracles used by the test suite and the acceptance runner.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core_utils import ValidationError
from fault_list import Fault
from label_generator import generate_meta_labels
from logic_sim import exhaustive_patterns, simulate_patterns, simulate_two_valued
from netlist import Circuit, GateType, random_circuit
from podem_engine import CampaignReport, Outcome
from testability import analyze, build_features

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_INPUTS = 16


def _exhaustive(circuit: Circuit) -> np.ndarray:
    n = len(circuit.sources)
    if n > MAX_EXHAUSTIVE_INPUTS:
        raise ValidationError(f"Exhaustive oracle limited to {MAX_EXHAUSTIVE_INPUTS} inputs, circuit has {n}")
    return exhaustive_patterns(n)


def detecting_patterns(circuit: Circuit, fault: Fault, patterns: Optional[np.ndarray] = None) -> np.ndarray:
    """Boolean mask of the patterns whose PO/PPO response differs under the fault"""
    patterns = _exhaustive(circuit) if patterns is None else patterns
    sinks = list(circuit.sinks)
    good = simulate_patterns(circuit, patterns)[:, sinks]
    bad = simulate_patterns(circuit, patterns, fault)[:, sinks]
    return np.any(good != bad, axis=1)


def is_detectable(circuit: Circuit, fault: Fault) -> bool:
    """True when some input combination detects the fault"""
    return bool(detecting_patterns(circuit, fault).any())


def vector_detects(circuit: Circuit, vector: Dict[int, int], fault: Fault) -> bool:
    """Independent good/faulty two-valued comparison at the sinks"""
    good = simulate_two_valued(circuit, vector)
    bad = simulate_two_valued(circuit, vector, fault)
    return any(good[n] != bad[n] for n in circuit.sinks)


@dataclass(frozen=True)
class OracleMismatch:
    fault: Fault
    outcome: Outcome
    reason: str


def check_campaign(circuit: Circuit, report: CampaignReport) -> List[OracleMismatch]:
    """DETECTED vectors must detect; UNTESTABLE faults must have no detecting input combination"""
    mismatches = []
    for result in report.results:
        if result.outcome is Outcome.DETECTED:
            if not vector_detects(circuit, result.filled_vector(circuit), result.fault):
                mismatches.append(OracleMismatch(result.fault, result.outcome, "vector does not detect"))
        elif result.outcome is Outcome.UNTESTABLE:
            if is_detectable(circuit, result.fault):
                mismatches.append(OracleMismatch(result.fault, result.outcome, "fault is detectable"))
    return mismatches


# =============================================================================
# TESTABILITY ORACLES
# =============================================================================

def _bool_function(gate_type: GateType, bits: Sequence[int]) -> int:
    if gate_type in (GateType.AND, GateType.NAND):
        value = int(all(bits))
    elif gate_type in (GateType.OR, GateType.NOR):
        value = int(any(bits))
    elif gate_type in (GateType.XOR, GateType.XNOR):
        value = sum(bits) % 2
    else:
        value = bits[0]
    return 1 - value if gate_type.is_inverting else value


def _forced_output(gate_type: GateType, partial: Sequence[Optional[int]]) -> Optional[int]:
    """Output value every completion of a partial input assignment agrees on, else None"""
    free = [k for k, bit in enumerate(partial) if bit is None]
    outputs = set()
    for fill in itertools.product((0, 1), repeat=len(free)):
        bits = list(partial)
        for k, bit in zip(free, fill):
            bits[k] = bit
        outputs.add(_bool_function(gate_type, bits))
        if len(outputs) > 1:
            return None
    return outputs.pop()


def scoap_brute_force(circuit: Circuit) -> Tuple[np.ndarray, np.ndarray]:
    """
    SCOAP controllability from its definition: 1 + the cheapest set of input values
    forcing each output value, found by enumerating every partial assignment
    (each input 0, 1 or left free); free inputs cost nothing
    """
    cost = {0: np.ones(circuit.num_nets, dtype=np.int64), 1: np.ones(circuit.num_nets, dtype=np.int64)}
    for gate_id in circuit.gate_order:
        gate = circuit.gates[gate_id]
        best: Dict[int, Optional[int]] = {0: None, 1: None}
        for partial in itertools.product((0, 1, None), repeat=len(gate.inputs)):
            out = _forced_output(gate.type, partial)
            if out is None:
                continue
            total = sum(int(cost[b][n]) for b, n in zip(partial, gate.inputs) if b is not None)
            if best[out] is None or total < best[out]:
                best[out] = total
        for v in (0, 1):
            if best[v] is None:
                raise ValidationError(f"Gate {gate_id} cannot produce {v}")
            cost[v][gate.output] = best[v] + 1
    return cost[0], cost[1]


def monte_carlo_cop(circuit: Circuit, n_vectors: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Estimated P(net = 1) under uniform inputs and the binomial standard error of each estimate"""
    patterns = rng.random((n_vectors, len(circuit.sources))) < 0.5
    estimate = simulate_patterns(circuit, patterns).mean(axis=0)
    return estimate, np.sqrt(estimate * (1.0 - estimate) / n_vectors)


def cop_sigma_violations(circuit: Circuit, cc: np.ndarray, n_vectors: int, rng: np.random.Generator,
                         sigmas: float = 3.0) -> np.ndarray:
    """Net ids whose COP value lies more than `sigmas` standard errors from the sampled estimate"""
    estimate, stderr = monte_carlo_cop(circuit, n_vectors, rng)
    # a net that never toggled in the sample has zero sampled error; use the error COP predicts
    expected = np.sqrt(np.clip(cc * (1.0 - cc), 0.0, None) / n_vectors)
    return np.flatnonzero(np.abs(cc - estimate) > sigmas * np.maximum(stderr, expected) + 1e-12)


def exact_signal_probability(circuit: Circuit) -> np.ndarray:
    """P(net = 1) over all input combinations"""
    return simulate_patterns(circuit, _exhaustive(circuit)).mean(axis=0)


# =============================================================================
# PLANTED META DATA
# =============================================================================

_FAMILY_GATES = {
    0: (GateType.AND, GateType.NAND, GateType.OR, GateType.NOR),
    1: (GateType.XOR, GateType.XNOR, GateType.NOT, GateType.BUF),
}


def planted_meta_data(rng: np.random.Generator, n_circuits: int = 10, n_inputs: int = 8,
                      n_gates: int = 40) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Extended features of gate-driven nets from random circuits whose winner is planted

    Circuits alternate between two gate families; the family fixes which synthetic
    model wins the circuit, so the winner is recoverable from each net's gate type.

    Returns:
        (features, classes, circuit names) row-aligned
    """
    features, names, work = [], [], {}
    for index in range(n_circuits):
        family = index % 2
        name = f"planted{index}"
        circuit = random_circuit(rng, n_inputs, n_gates, gate_types=_FAMILY_GATES[family], name=name)
        table = build_features(circuit, analyze(circuit))
        driven = [net.id for net in circuit.nets if net.driver is not None]
        features.append(table.extended[driven])
        names.extend([name] * len(driven))
        # synthetic work counts: the planted winner does strictly less work
        work[name] = (100, 500) if family == 0 else (500, 100)

    labels = generate_meta_labels(work)
    names_array = np.array(names, dtype=object)
    classes = np.array([labels[n] for n in names], dtype=np.int64)
    return np.vstack(features), classes, names_array
