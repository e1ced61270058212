"""COP/SCOAP measures and feature assembly"""

import numpy as np
import pytest

from core_utils import UnsupportedGateError, ValidationError
from netlist import GateType, parse_bench, random_circuit
from oracles import cop_sigma_violations, exact_signal_probability, scoap_brute_force
from testability import (BASE_DIM, EXTENDED_DIM, analyze, build_features, cop_controllability, cop_observability,
                         normalize_distance, scoap_controllability, scoap_observability, write_features_csv)


def test_and_of_inputs(and_circuit):
    a, y = and_circuit.net_id("a"), and_circuit.net_id("y")
    analysis = analyze(and_circuit)
    assert analysis.cc[y] == pytest.approx(0.25)
    assert analysis.co[y] == 1.0
    assert analysis.co[a] == pytest.approx(0.5)
    assert (analysis.cc0[y], analysis.cc1[y]) == (2, 3)
    assert analysis.scoap_co[y] == 0
    assert analysis.scoap_co[a] == 2


def test_nor_and_not_of_inputs():
    circuit = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nOUTPUT(n)\ny = NOR(a, b)\nn = NOT(a)\n")
    cc = cop_controllability(circuit)
    cc0, cc1 = scoap_controllability(circuit)
    n = circuit.net_id("n")
    assert cc[circuit.net_id("y")] == pytest.approx(0.25)
    assert cc[n] == pytest.approx(0.5)
    assert (cc0[n], cc1[n]) == (2, 2)


def test_xor_controllability():
    circuit = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nt = AND(a, b)\ny = XOR(t, b)\n")
    cc = cop_controllability(circuit)
    assert cc[circuit.net_id("y")] == pytest.approx(0.25 * 0.5 + 0.5 * 0.75)


def test_stem_rules():
    # a fans out to an observable AND pin (co 0.5) and a directly observed BUF (co 1.0)
    circuit = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nOUTPUT(z)\ny = AND(a, b)\nz = BUF(a)\n")
    analysis = analyze(circuit)
    a = circuit.net_id("a")
    assert analysis.co[a] == pytest.approx(1.0)
    assert analysis.scoap_co[a] == 1


def test_input_and_output_conventions(c17):
    analysis = analyze(c17)
    for net_id in c17.sources:
        assert analysis.cc[net_id] == 0.5
        assert analysis.cc0[net_id] == analysis.cc1[net_id] == 1
    for net_id in c17.sinks:
        assert analysis.co[net_id] == 1.0
        assert analysis.scoap_co[net_id] == 0
    assert np.all((analysis.cc >= 0) & (analysis.cc <= 1))
    assert np.all((analysis.co >= 0) & (analysis.co <= 1))
    assert np.all(analysis.cc0 >= 1) and np.all(analysis.cc1 >= 1)


def test_cop_exact_on_fanout_free_circuits(rng):
    for _ in range(10):
        circuit = random_circuit(rng, 8, 30, fanout_free=True)
        np.testing.assert_allclose(cop_controllability(circuit), exact_signal_probability(circuit), atol=1e-9)


def test_cop_close_to_monte_carlo(rng):
    circuit = random_circuit(rng, 10, 40, fanout_free=True)
    cc = cop_controllability(circuit)
    violations = cop_sigma_violations(circuit, cc, 100_000, rng)
    assert len(violations) <= 0.01 * circuit.num_nets + 1


def test_scoap_matches_brute_force(rng):
    for _ in range(10):
        circuit = random_circuit(rng, int(rng.integers(2, 12)), 30)
        cc0, cc1 = scoap_controllability(circuit)
        want0, want1 = scoap_brute_force(circuit)
        np.testing.assert_array_equal(cc0, want0)
        np.testing.assert_array_equal(cc1, want1)


def test_scoap_strictly_increases_along_gates(rng):
    circuit = random_circuit(rng, 6, 50)
    cc0, cc1 = scoap_controllability(circuit)
    for gate in circuit.gates:
        least = min(min(cc0[i], cc1[i]) for i in gate.inputs)
        assert min(cc0[gate.output], cc1[gate.output]) > least


def test_inverter_swaps_controllability():
    circuit = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(n)\nt = NAND(a, b)\nn = NOT(t)\n")
    cc0, cc1 = scoap_controllability(circuit)
    t, n = circuit.net_id("t"), circuit.net_id("n")
    assert (cc0[n], cc1[n]) == (cc1[t] + 1, cc0[t] + 1)


def test_unobservable_net_saturates():
    circuit = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = BUF(a)\n")
    analysis = analyze(circuit)
    b = circuit.net_id("b")
    assert analysis.co[b] == 0.0
    assert analysis.scoap_co[b] == 10 ** 9


def test_bad_gate_rejected():
    circuit = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = MUX(a, b)\n")
    with pytest.raises(UnsupportedGateError):
        cop_controllability(circuit)
    with pytest.raises(UnsupportedGateError):
        scoap_controllability(circuit)


@pytest.mark.parametrize("distances,expected", [
    ([0, 5, 10], [0.0, 0.5, 1.0]),
    ([3, 3, 3], [0.0, 0.0, 0.0]),
    ([2, 3], [0.0, 1.0]),
    ({1: 3, 0: 2}, [0.0, 1.0]),
])
def test_normalize_distance(distances, expected):
    assert normalize_distance(distances).tolist() == expected


def test_normalize_distance_empty():
    with pytest.raises(ValidationError):
        normalize_distance([])


def test_features_of_c17(c17):
    analysis = analyze(c17)
    table = build_features(c17, analysis)
    assert table.base.shape == (11, BASE_DIM)
    assert table.extended.shape == (11, EXTENDED_DIM)
    np.testing.assert_array_equal(table.base[:, 3:].sum(axis=1), np.ones(11))
    assert np.all((table.base[:, 2] >= 0) & (table.base[:, 2] <= 1))

    pi = c17.sources[0]
    assert table[pi].base[:3].tolist() == [0.5, analysis.co[pi], 0.0]
    assert table[pi].base[3 + GateType.PI.value] == 1.0

    out = c17.net_id("22")
    assert table[out].base[3 + GateType.NAND.value] == 1.0
    assert table[out].extended[BASE_DIM:].tolist() == [
        analysis.cc0[out], analysis.cc1[out], analysis.scoap_co[out], analysis.fanout[out]]


def test_stem_observability_over_branches(c17):
    analysis = analyze(c17)
    cc0, cc1 = scoap_controllability(c17)
    co = scoap_observability(c17, cc0, cc1)
    stem, n2, n7, n16, n19 = (c17.net_id(n) for n in ("11", "2", "7", "16", "19"))
    assert co[stem] == min(co[n16] + cc1[n2] + 1, co[n19] + cc1[n7] + 1)
    cop = cop_observability(c17, analysis.cc)
    assert cop[stem] == pytest.approx(max(cop[n16] * analysis.cc[n2], cop[n19] * analysis.cc[n7]))


def test_features_csv(tmp_path, c17):
    path = tmp_path / "c17.features.csv"
    write_features_csv(path, build_features(c17, analyze(c17)))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("net,cc,co,dist_norm,g0,")
    assert lines[0].endswith(",g13,cc0,cc1,scoap_co,fanout")
    assert [line.split(",")[0] for line in lines[1:]] == [n.name for n in c17.nets]
    assert all(len(line.split(",")) == 1 + EXTENDED_DIM for line in lines)
