"""Shared fixtures for the HybMT test suite"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from netlist import Circuit, from_gate_specs, load_bench, parse_bench  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

AND_BENCH = "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def c17_path() -> Path:
    return FIXTURES / "c17.bench"


@pytest.fixture
def c17(c17_path) -> Circuit:
    return load_bench(c17_path)


@pytest.fixture
def and_circuit() -> Circuit:
    return parse_bench(AND_BENCH, name="and2")


@pytest.fixture
def redundant_circuit() -> Circuit:
    """y = OR(a, AND(a, b)): the AND output stuck-at-0 cannot be detected"""
    return from_gate_specs("redundant", ["a", "b"], ["y"], [("g", "AND", ["a", "b"]), ("y", "OR", ["a", "g"])])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
