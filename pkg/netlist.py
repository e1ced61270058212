#!/usr/bin/env python3
"""
Gate-level netlist model
Parses BENCH netlists into an immutable, levelized circuit graph with per-net structural metadata.
"""

import logging
import re
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from core_utils import (
    BenchSyntaxError,
    CycleError,
    DuplicateNetError,
    UndefinedNetError,
    ValidationError,
)

logger = logging.getLogger(__name__)


class GateType(Enum):
    """Gate kinds; the value is the one-hot position in feature vectors"""
    PI = 0
    PO = 1
    PPI = 2
    PPO = 3
    NOT = 4
    AND = 5
    NAND = 6
    OR = 7
    NOR = 8
    XOR = 9
    XNOR = 10
    DFF = 11
    BUF = 12
    BAD = 13

    @classmethod
    def from_keyword(cls, keyword: str) -> "GateType":
        """Map a BENCH gate keyword (case-insensitive) to a type; unknown keywords are BAD"""
        word = keyword.strip().upper()
        if word == "BUFF":
            return cls.BUF
        try:
            return cls[word]
        except KeyError:
            return cls.BAD

    @property
    def is_inverting(self) -> bool:
        return self in _INVERTING

    @property
    def is_logic(self) -> bool:
        """True for gate kinds with evaluation semantics"""
        return self in LOGIC_TYPES


GATE_TYPE_COUNT = len(GateType)
LOGIC_TYPES: FrozenSet[GateType] = frozenset({
    GateType.NOT, GateType.AND, GateType.NAND, GateType.OR, GateType.NOR,
    GateType.XOR, GateType.XNOR, GateType.BUF, GateType.PO, GateType.PPO,
})
SINGLE_INPUT_TYPES: FrozenSet[GateType] = frozenset({GateType.NOT, GateType.BUF, GateType.PO, GateType.PPO})
_INVERTING = frozenset({GateType.NOT, GateType.NAND, GateType.NOR, GateType.XNOR})


@dataclass(frozen=True)
class Gate:
    """One gate instance: type, input net ids and output net id"""
    id: int
    type: GateType
    inputs: Tuple[int, ...]
    output: int


@dataclass(frozen=True)
class Net:
    """A signal line with its driver and fanout pins"""
    id: int
    name: str
    driver: Optional[int]
    fanout_branches: Tuple[Tuple[int, int], ...]
    level: int = 0

    @property
    def fanout_count(self) -> int:
        return len(self.fanout_branches)


@dataclass(frozen=True, eq=False)
class Circuit:
    """Immutable combinational circuit graph (flip-flops already cut into PPI/PPO pairs)"""
    name: str
    nets: Tuple[Net, ...]
    gates: Tuple[Gate, ...]
    primary_inputs: Tuple[int, ...]
    primary_outputs: Tuple[int, ...]
    pseudo_inputs: Tuple[int, ...] = ()
    pseudo_outputs: Tuple[int, ...] = ()
    flip_flops: Tuple[Tuple[int, int], ...] = ()
    gate_order: Tuple[int, ...] = ()

    @property
    def num_nets(self) -> int:
        return len(self.nets)

    @cached_property
    def sources(self) -> Tuple[int, ...]:
        """Assignable nets: PIs then PPIs"""
        return tuple(dict.fromkeys(self.primary_inputs + self.pseudo_inputs))

    @cached_property
    def sinks(self) -> Tuple[int, ...]:
        """Observable nets: POs then PPOs"""
        return tuple(dict.fromkeys(self.primary_outputs + self.pseudo_outputs))

    @cached_property
    def source_set(self) -> FrozenSet[int]:
        return frozenset(self.sources)

    @cached_property
    def sink_set(self) -> FrozenSet[int]:
        return frozenset(self.sinks)

    @cached_property
    def net_by_name(self) -> Dict[str, int]:
        return {net.name: net.id for net in self.nets}

    @cached_property
    def levels(self) -> np.ndarray:
        return np.array([net.level for net in self.nets], dtype=np.int64)

    @property
    def max_level(self) -> int:
        return int(self.levels.max()) if self.nets else 0

    def net_id(self, name: str) -> int:
        try:
            return self.net_by_name[name]
        except KeyError:
            raise UndefinedNetError(f"Net '{name}' does not exist in circuit '{self.name}'") from None

    def driver_type(self, net_id: int) -> GateType:
        """Gate type attributed to a net: its driver, or PI/PPI for sources"""
        net = self.nets[net_id]
        if net.driver is not None:
            return self.gates[net.driver].type
        if net_id in self.pseudo_inputs and net_id not in self.primary_inputs:
            return GateType.PPI
        return GateType.PI

    def summary(self) -> Dict[str, Union[str, int]]:
        return {
            'name': self.name,
            'nets': self.num_nets,
            'gates': len(self.gates),
            'inputs': len(self.primary_inputs),
            'outputs': len(self.primary_outputs),
            'pseudo_inputs': len(self.pseudo_inputs),
            'pseudo_outputs': len(self.pseudo_outputs),
            'levels': self.max_level,
        }


# =============================================================================
# BUILDER
# =============================================================================

class _NetlistBuilder:
    """Collects declarations in file order and resolves them into a Circuit"""

    def __init__(self, name: str, source: str, reserved: Iterable[str] = ()):
        self.name = name
        self.source = source
        self.reserved: Set[str] = set(reserved)
        self.net_names: List[str] = []
        self.net_ids: Dict[str, int] = {}
        self.definition_site: Dict[str, Tuple[int, int]] = {}
        self.inputs: List[str] = []
        self.outputs: List[Tuple[str, int, int]] = []
        self.flip_flops: List[Tuple[str, str, int, int]] = []
        self.gate_specs: List[Tuple[GateType, List[str], str, int, int]] = []

    def define(self, name: str, line: int, column: int) -> int:
        if name in self.net_ids:
            first_line, _ = self.definition_site[name]
            raise DuplicateNetError(
                f"{self.source}:{line}:{column}: net '{name}' already defined on line {first_line}")
        self.net_ids[name] = len(self.net_names)
        self.net_names.append(name)
        self.definition_site[name] = (line, column)
        self.reserved.add(name)
        return self.net_ids[name]

    def fresh_name(self, base: str) -> str:
        candidate = base
        while candidate in self.reserved:
            candidate += "_"
        self.reserved.add(candidate)
        return candidate

    def add_input(self, name: str, line: int = 0, column: int = 0) -> None:
        self.define(name, line, column)
        self.inputs.append(name)

    def add_output(self, name: str, line: int = 0, column: int = 0) -> None:
        if any(existing == name for existing, _, _ in self.outputs):
            logger.warning(f"{self.source}:{line}: duplicate OUTPUT({name}) ignored")
            return
        self.outputs.append((name, line, column))

    def add_flip_flop(self, q: str, d: str, line: int = 0, column: int = 0) -> None:
        self.define(q, line, column)
        self.flip_flops.append((q, d, line, column))

    def add_gate(self, out: str, gate_type: GateType, inputs: Sequence[str], line: int = 0, column: int = 0) -> None:
        inputs = list(inputs)
        if gate_type in (GateType.XOR, GateType.XNOR) and len(inputs) > 2:
            # left-associative chain of 2-input gates; only the last one may invert
            left = inputs[0]
            for index, right in enumerate(inputs[1:-1], start=1):
                intermediate = self.fresh_name(f"{out}_xor{index}")
                self.define(intermediate, line, column)
                self.gate_specs.append((GateType.XOR, [left, right], intermediate, line, column))
                left = intermediate
            inputs = [left, inputs[-1]]
        self.define(out, line, column)
        self.gate_specs.append((gate_type, inputs, out, line, column))

    def _resolve(self, name: str, line: int, column: int, context: str) -> int:
        try:
            return self.net_ids[name]
        except KeyError:
            raise UndefinedNetError(
                f"{self.source}:{line}:{column}: {context} references undefined net '{name}'") from None

    def build(self) -> Circuit:
        gates: List[Gate] = []
        for gate_type, input_names, out, line, column in self.gate_specs:
            ins = tuple(self._resolve(n, line, column, f"gate '{out}'") for n in input_names)
            gates.append(Gate(id=len(gates), type=gate_type, inputs=ins, output=self.net_ids[out]))

        flip_flops = tuple(
            (self.net_ids[q], self._resolve(d, line, column, f"flip-flop '{q}'"))
            for q, d, line, column in self.flip_flops
        )
        outputs = tuple(self._resolve(n, line, column, "OUTPUT") for n, line, column in self.outputs)

        drivers: List[Optional[int]] = [None] * len(self.net_names)
        branches: List[List[Tuple[int, int]]] = [[] for _ in self.net_names]
        for gate in gates:
            drivers[gate.output] = gate.id
            for pin, net_id in enumerate(gate.inputs):
                branches[net_id].append((gate.id, pin))

        nets = tuple(
            Net(id=i, name=name, driver=drivers[i], fanout_branches=tuple(branches[i]))
            for i, name in enumerate(self.net_names)
        )
        circuit = Circuit(
            name=self.name,
            nets=nets,
            gates=tuple(gates),
            primary_inputs=tuple(self.net_ids[n] for n in self.inputs),
            primary_outputs=outputs,
            pseudo_inputs=tuple(q for q, _ in flip_flops),
            pseudo_outputs=tuple(dict.fromkeys(d for _, d in flip_flops)),
            flip_flops=flip_flops,
        )
        return levelize(circuit)


# =============================================================================
# PARSING
# =============================================================================

_DECLARATION = re.compile(r'^\s*(INPUT|OUTPUT)\s*\(\s*([^\s(),=]+)\s*\)\s*$', re.IGNORECASE)
_ASSIGNMENT = re.compile(r'^\s*([^\s(),=]+)\s*=\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$')
_NET_NAME = re.compile(r'^[^\s(),=]+$')


def _column_of(text: str, fragment: str, start: int = 0) -> int:
    index = text.find(fragment, start)
    return (index if index >= 0 else 0) + 1


def parse_bench(text: str, name: str = "circuit", source: str = "<bench>") -> Circuit:
    """
    Parse BENCH text into a levelized Circuit

    Args:
        text: Netlist contents
        name: Circuit name recorded in reports
        source: File name used in diagnostics

    Returns:
        Levelized Circuit with DFFs cut into PPI/PPO pairs

    Raises:
        BenchSyntaxError, UndefinedNetError, DuplicateNetError, CycleError
    """
    statements = []
    reserved: Set[str] = set()

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split('#', 1)[0]
        if not line.strip():
            continue

        declaration = _DECLARATION.match(line)
        if declaration:
            keyword, net_name = declaration.group(1).upper(), declaration.group(2)
            statements.append((keyword, net_name, None, [], line_no, _column_of(line, net_name)))
            reserved.add(net_name)
            continue

        assignment = _ASSIGNMENT.match(line)
        if not assignment:
            column = len(line) - len(line.lstrip()) + 1
            raise BenchSyntaxError(f"unrecognized statement '{line.strip()}'", line_no, column, source)

        out, keyword, arg_text = assignment.group(1), assignment.group(2), assignment.group(3)
        args_start = assignment.start(3)
        args = [arg.strip() for arg in arg_text.split(',')]
        if arg_text.strip() == "":
            raise BenchSyntaxError(f"gate '{out}' has no inputs", line_no, args_start + 1, source)
        for arg in args:
            if not _NET_NAME.match(arg):
                raise BenchSyntaxError(f"invalid net name '{arg}'", line_no,
                                       _column_of(line, arg, args_start) if arg else args_start + 1, source)

        gate_type = GateType.from_keyword(keyword)
        keyword_column = _column_of(line, keyword)
        if gate_type in (GateType.PI, GateType.PPI):
            raise BenchSyntaxError(f"{gate_type.name} cannot be driven by an assignment", line_no, keyword_column, source)
        if (gate_type in SINGLE_INPUT_TYPES or gate_type == GateType.DFF) and len(args) != 1:
            raise BenchSyntaxError(f"{gate_type.name} takes exactly one input, got {len(args)}",
                                   line_no, keyword_column, source)
        if gate_type in (GateType.XOR, GateType.XNOR) and len(args) < 2:
            raise BenchSyntaxError(f"{gate_type.name} needs at least two inputs", line_no, keyword_column, source)

        statements.append(('GATE', out, gate_type, args, line_no, _column_of(line, out)))
        reserved.add(out)
        reserved.update(args)

    builder = _NetlistBuilder(name, source, reserved)
    for kind, net_name, gate_type, args, line_no, column in statements:
        if kind == 'INPUT':
            builder.add_input(net_name, line_no, column)
        elif kind == 'OUTPUT':
            builder.add_output(net_name, line_no, column)
        elif gate_type == GateType.DFF:
            builder.add_flip_flop(net_name, args[0], line_no, column)
        else:
            builder.add_gate(net_name, gate_type, args, line_no, column)

    circuit = builder.build()
    logger.debug(f"Parsed {source}: {len(circuit.gates)} gates, {circuit.num_nets} nets, "
                 f"{len(circuit.flip_flops)} flip-flops")
    return circuit


def load_bench(path: Union[str, Path]) -> Circuit:
    """Read and parse a BENCH file; the circuit is named after the file stem"""
    path = Path(path)
    text = path.read_text(encoding='utf-8')
    return parse_bench(text, name=path.stem, source=str(path))


def from_gate_specs(
    name: str,
    inputs: Sequence[str],
    outputs: Sequence[str],
    gates: Sequence[Tuple[str, Union[GateType, str], Sequence[str]]],
    flip_flops: Sequence[Tuple[str, str]] = (),
) -> Circuit:
    """Build a circuit programmatically from (output, type, inputs) triples"""
    reserved = set(inputs) | {out for out, _, _ in gates} | {q for q, _ in flip_flops}
    builder = _NetlistBuilder(name, f"<{name}>", reserved)
    for net_name in inputs:
        builder.add_input(net_name)
    for q, d in flip_flops:
        builder.add_flip_flop(q, d)
    for out, gate_type, ins in gates:
        if isinstance(gate_type, str):
            gate_type = GateType.from_keyword(gate_type)
        builder.add_gate(out, gate_type, ins)
    for net_name in outputs:
        builder.add_output(net_name)
    return builder.build()


def serialize_bench(circuit: Circuit) -> str:
    """Canonical BENCH text: inputs, outputs, flip-flops, then gates in level order"""
    names = [net.name for net in circuit.nets]
    lines = [f"# {circuit.name}"]
    lines.extend(f"INPUT({names[n]})" for n in circuit.primary_inputs)
    lines.extend(f"OUTPUT({names[n]})" for n in circuit.primary_outputs)
    lines.extend(f"{names[q]} = DFF({names[d]})" for q, d in circuit.flip_flops)
    for gate_id in circuit.gate_order:
        gate = circuit.gates[gate_id]
        args = ", ".join(names[n] for n in gate.inputs)
        lines.append(f"{names[gate.output]} = {gate.type.name}({args})")
    return "\n".join(lines) + "\n"


# =============================================================================
# STRUCTURAL PASSES
# =============================================================================

def levelize(circuit: Circuit) -> Circuit:
    """Assign topological levels (sources at 0) and a level-ordered gate sequence"""
    num_nets = circuit.num_nets
    level = [-1] * num_nets
    pending = [len(gate.inputs) for gate in circuit.gates]
    ready = deque()

    for net in circuit.nets:
        if net.driver is None:
            level[net.id] = 0
            ready.append(net.id)

    while ready:
        net_id = ready.popleft()
        for gate_id, _ in circuit.nets[net_id].fanout_branches:
            pending[gate_id] -= 1
            if pending[gate_id] == 0:
                gate = circuit.gates[gate_id]
                level[gate.output] = 1 + max(level[i] for i in gate.inputs)
                ready.append(gate.output)

    unresolved = [circuit.nets[g.output].name for g in circuit.gates if pending[g.id] > 0]
    if unresolved:
        preview = ", ".join(sorted(unresolved)[:8])
        raise CycleError(f"Combinational cycle in '{circuit.name}' through nets: {preview}")

    nets = tuple(replace(net, level=level[net.id]) for net in circuit.nets)
    gate_order = tuple(sorted(range(len(circuit.gates)), key=lambda g: (level[circuit.gates[g].output], g)))
    return replace(circuit, nets=nets, gate_order=gate_order)


def shortest_pi_distance(circuit: Circuit) -> np.ndarray:
    """Gate hops from the nearest PI/PPI for every net"""
    distance = np.zeros(circuit.num_nets, dtype=np.int64)
    for gate_id in circuit.gate_order:
        gate = circuit.gates[gate_id]
        distance[gate.output] = 1 + min(distance[i] for i in gate.inputs)
    return distance


# =============================================================================
# SYNTHETIC CIRCUITS
# =============================================================================

_RANDOM_GATE_TYPES = (
    GateType.AND, GateType.NAND, GateType.OR, GateType.NOR,
    GateType.XOR, GateType.XNOR, GateType.NOT, GateType.BUF,
)


def random_circuit(
    rng: np.random.Generator,
    n_inputs: int,
    n_gates: int,
    *,
    fanout_free: bool = False,
    max_fanin: int = 3,
    gate_types: Sequence[GateType] = _RANDOM_GATE_TYPES,
    name: str = "random",
) -> Circuit:
    """
    Generate a random acyclic circuit; every net without fanout becomes a PO

    With fanout_free=True every net feeds at most one gate pin (a forest of trees).
    """
    if n_inputs < 1 or n_gates < 0:
        raise ValidationError("random_circuit needs at least one input and a non-negative gate count")

    inputs = [f"i{k}" for k in range(n_inputs)]
    available = list(inputs)
    unused = list(inputs)
    specs = []

    for k in range(n_gates):
        pool = unused if fanout_free else available
        if not pool:
            break
        gate_type = gate_types[int(rng.integers(len(gate_types)))]
        if gate_type in SINGLE_INPUT_TYPES:
            arity = 1
        elif gate_type in (GateType.XOR, GateType.XNOR):
            arity = 2
        else:
            arity = int(rng.integers(2, max_fanin + 1))
        if len(pool) < arity:
            if len(pool) >= 2:
                arity = 2 if gate_type not in SINGLE_INPUT_TYPES else 1
            else:
                gate_type = GateType.NOT if gate_type.is_inverting else GateType.BUF
                arity = 1

        if not fanout_free and unused and rng.random() < 0.6:
            # bias towards consuming dangling nets so most logic stays observable
            first = unused[int(rng.integers(len(unused)))]
            rest_pool = [n for n in available if n != first]
            rest = list(rng.choice(rest_pool, size=arity - 1, replace=False)) if arity > 1 else []
            chosen = [first] + [str(n) for n in rest]
        else:
            chosen = [str(n) for n in rng.choice(pool, size=arity, replace=False)]

        out = f"n{k}"
        specs.append((out, gate_type, chosen))
        for net_name in chosen:
            if net_name in unused:
                unused.remove(net_name)
        available.append(out)
        unused.append(out)

    return from_gate_specs(name, inputs, list(unused), specs)
