"""Netlist parsing, levelization and structural passes"""

from collections import Counter

import numpy as np
import pytest

from core_utils import BenchSyntaxError, CycleError, DuplicateNetError, UndefinedNetError
from netlist import (GATE_TYPE_COUNT, GateType, from_gate_specs, parse_bench, random_circuit, serialize_bench,
                     shortest_pi_distance)


def test_gate_type_has_fourteen_variants():
    assert GATE_TYPE_COUNT == 14
    assert sorted(t.value for t in GateType) == list(range(14))


@pytest.mark.parametrize("keyword,expected", [
    ("and", GateType.AND), ("NAND", GateType.NAND), ("Buff", GateType.BUF), ("buf", GateType.BUF),
    ("dff", GateType.DFF), ("MUX", GateType.BAD), ("xor", GateType.XOR),
])
def test_from_keyword(keyword, expected):
    assert GateType.from_keyword(keyword) is expected


def test_minimal_and(and_circuit):
    assert and_circuit.num_nets == 3
    assert len(and_circuit.gates) == 1
    assert and_circuit.gates[0].type is GateType.AND
    y = and_circuit.net_id("y")
    assert and_circuit.levels.tolist() == [0, 0, 1]
    assert and_circuit.primary_outputs == (y,)


def test_c17_structure(c17):
    summary = c17.summary()
    assert summary['inputs'] == 5
    assert summary['outputs'] == 2
    assert summary['gates'] == 6
    assert summary['nets'] == 11
    assert c17.max_level == 3
    assert all(g.type is GateType.NAND for g in c17.gates)


def test_net_ids_follow_file_order(c17):
    assert [n.name for n in c17.nets] == ["1", "2", "3", "6", "7", "10", "11", "16", "19", "22", "23"]


def test_not_chain_levels():
    circuit = parse_bench("INPUT(a)\nOUTPUT(d)\nb = NOT(a)\nc = NOT(b)\nd = NOT(c)\n")
    assert [circuit.nets[circuit.net_id(n)].level for n in "bcd"] == [1, 2, 3]


def test_comments_blank_lines_and_case():
    text = "# header\n\nINPUT(a)  # trailing\ninput(b)\nOUTPUT(y)\n  y  =  nand ( a , b )\n"
    circuit = parse_bench(text)
    assert circuit.gates[0].type is GateType.NAND
    assert circuit.gates[0].inputs == (circuit.net_id("a"), circuit.net_id("b"))


def test_undefined_net():
    with pytest.raises(UndefinedNetError):
        parse_bench("INPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n")


def test_duplicate_definition():
    with pytest.raises(DuplicateNetError):
        parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\ny = BUF(a)\n")


def test_cycle():
    with pytest.raises(CycleError):
        parse_bench("INPUT(a)\nOUTPUT(y)\nx = AND(a, y)\ny = NOT(x)\n")


def test_syntax_error_reports_position():
    with pytest.raises(BenchSyntaxError) as info:
        parse_bench("INPUT(a)\nOUTPUT(y)\n  y = AND(a, b\n", source="bad.bench")
    assert info.value.line == 3
    assert info.value.column == 3
    assert "bad.bench:3:3" in str(info.value)


def test_single_input_gate_arity_checked():
    with pytest.raises(BenchSyntaxError):
        parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NOT(a, b)\n")


def test_unknown_keyword_is_bad():
    circuit = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = MUX(a, b)\n")
    assert circuit.gates[0].type is GateType.BAD


def test_dff_split_into_pseudo_ports():
    circuit = parse_bench("INPUT(a)\nOUTPUT(y)\nq = DFF(d)\nd = AND(a, q)\ny = NOT(q)\n")
    q, d = circuit.net_id("q"), circuit.net_id("d")
    assert circuit.pseudo_inputs == (q,)
    assert circuit.pseudo_outputs == (d,)
    assert circuit.nets[q].level == 0
    assert circuit.driver_type(q) is GateType.PPI
    assert circuit.sources == (circuit.net_id("a"), q)


def test_multi_input_xor_decomposed():
    circuit = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\ny = XNOR(a, b, c)\n")
    types = [g.type for g in circuit.gates]
    assert types == [GateType.XOR, GateType.XNOR]
    assert all(len(g.inputs) == 2 for g in circuit.gates)
    assert circuit.nets[circuit.net_id("y")].level == 2


def test_fanout_counts_match_pins(c17):
    assert sum(len(g.inputs) for g in c17.gates) == sum(n.fanout_count for n in c17.nets)
    assert c17.nets[c17.net_id("11")].fanout_count == 2
    assert c17.nets[c17.net_id("16")].fanout_count == 2


def test_gate_inputs_have_lower_level(rng):
    circuit = random_circuit(rng, 6, 40)
    for gate in circuit.gates:
        assert all(circuit.levels[i] < circuit.levels[gate.output] for i in gate.inputs)


def test_shortest_pi_distance():
    circuit = from_gate_specs(
        "dist", ["a", "b"], ["y"],
        [("n1", "NOT", ["a"]), ("n2", "NOT", ["n1"]), ("n3", "NOT", ["n2"]), ("n4", "NOT", ["n3"]),
         ("m", "BUF", ["b"]), ("y", "AND", ["m", "n4"])],
    )
    distance = shortest_pi_distance(circuit)
    assert distance[circuit.net_id("a")] == 0
    assert distance[circuit.net_id("n4")] == 4
    assert distance[circuit.net_id("m")] == 1
    assert distance[circuit.net_id("y")] == 2
    assert np.all(circuit.levels >= distance)


def test_serialize_round_trip(c17):
    text = serialize_bench(c17)
    again = parse_bench(text, name=c17.name)
    names = [n.name for n in c17.nets]
    names_again = [n.name for n in again.nets]

    def gate_multiset(circuit, net_names):
        return Counter((g.type, net_names[g.output], tuple(net_names[i] for i in g.inputs)) for g in circuit.gates)

    assert gate_multiset(c17, names) == gate_multiset(again, names_again)
    assert [names[n] for n in c17.primary_outputs] == [names_again[n] for n in again.primary_outputs]
    assert serialize_bench(again) == text


def test_serializer_uses_canonical_names():
    circuit = parse_bench("INPUT(a)\nOUTPUT(y)\ny = buff(a)\n")
    assert "y = BUF(a)" in serialize_bench(circuit)


def test_random_circuit_fanout_free(rng):
    circuit = random_circuit(rng, 8, 20, fanout_free=True)
    assert all(net.fanout_count <= 1 for net in circuit.nets)
    assert all(net.fanout_count == 0 for net in circuit.nets if net.id in circuit.sink_set)
