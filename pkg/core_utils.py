#!/usr/bin/env python3
"""
Core utilities for the HybMT ATPG toolkit
Exception hierarchy, exit codes, timing and seeded random streams shared by every module.
"""

import logging
import time
import zlib
from dataclasses import dataclass
from enum import IntEnum
from functools import wraps
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

TOOL_VERSION = "0.3.0"

# =============================================================================
# EXIT CODES
# =============================================================================

class ExitCode(IntEnum):
    """Process exit codes of the command line tool"""
    OK = 0
    USAGE = 1
    INPUT = 2
    INTERNAL = 3

# =============================================================================
# CUSTOM EXCEPTIONS
# =============================================================================

class HybMTError(Exception):
    """Base exception for toolkit operations"""
    exit_code = ExitCode.INPUT

class NetlistError(HybMTError):
    """Structural netlist errors"""
    pass

class BenchSyntaxError(NetlistError):
    """Malformed BENCH statement"""

    def __init__(self, message: str, line: int, column: int, source: str = "<bench>"):
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")

class UndefinedNetError(NetlistError):
    """Reference to a net that is never defined"""
    pass

class DuplicateNetError(NetlistError):
    """Net defined more than once"""
    pass

class CycleError(NetlistError):
    """Combinational loop in the netlist"""
    pass

class UnsupportedGateError(HybMTError):
    """Gate type without evaluation semantics (BAD, or a port used as logic)"""
    pass

class VectorError(HybMTError):
    """Test vector that does not fully assign the circuit inputs"""
    pass

class DataFormatError(HybMTError):
    """Malformed CSV or training data"""
    pass

class ModelFormatError(HybMTError):
    """Malformed or incompatible model file"""
    pass

class ConfigError(HybMTError):
    """Invalid configuration"""
    exit_code = ExitCode.USAGE

class ValidationError(HybMTError):
    """Invalid argument value"""
    exit_code = ExitCode.USAGE

class TrainingError(HybMTError):
    """Model training failed"""
    pass

class SolverError(TrainingError):
    """Optimizer did not converge within its iteration cap"""
    pass

class EngineStateError(HybMTError):
    """Search engine reached a state its own invariants forbid"""
    exit_code = ExitCode.INTERNAL

class InvariantViolation(HybMTError):
    """A result failed an independent consistency check"""
    exit_code = ExitCode.INTERNAL

# =============================================================================
# PERFORMANCE UTILITIES
# =============================================================================

def performance_monitor(func_name: Optional[str] = None):
    """Decorator to log the duration of heavy operations"""
    def decorator(func: Callable) -> Callable:
        name = func_name or f"{func.__module__}.{func.__name__}"

        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                result = func(*args, **kwargs)
                duration = time.perf_counter() - start_time
                logger.debug(f"Function {name} completed in {duration:.3f}s")
                return result
            except Exception as e:
                duration = time.perf_counter() - start_time
                logger.error(f"Function {name} failed after {duration:.3f}s: {e}")
                raise

        return wrapper
    return decorator

# =============================================================================
# SEEDED RANDOM STREAMS
# =============================================================================

@dataclass(frozen=True)
class SeedStreams:
    """Splits one 64-bit seed into independent named generators.

    The same (seed, name) pair always yields the same stream, so a component
    such as weight init or bootstrap sampling can be replayed in isolation.
    """
    seed: int

    def rng(self, name: str, *index: int) -> np.random.Generator:
        key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(i) for i in index)
        sequence = np.random.SeedSequence(entropy=self.seed & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
        return np.random.default_rng(sequence)


# =============================================================================
# SAMPLE WEIGHTS
# =============================================================================

def check_sample_weight(weight: Optional[np.ndarray], n: int) -> Optional[np.ndarray]:
    """None, or n finite strictly positive row weights as float64"""
    if weight is None:
        return None
    weight = np.asarray(weight, dtype=np.float64)
    if weight.shape != (n,):
        raise ValidationError(f"{weight.size} sample weights for {n} rows")
    if not np.isfinite(weight).all() or np.any(weight <= 0):
        raise ValidationError("Sample weights must be finite and positive")
    return weight
