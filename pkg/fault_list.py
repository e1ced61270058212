#!/usr/bin/env python3
"""
Stuck-at fault lists
Enumeration, COP detection probabilities, hard-fault ranking and random selection.
"""

import csv
import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Sequence, Union

from core_utils import DataFormatError, EngineStateError, SeedStreams, ValidationError
from netlist import Circuit
from testability import TestabilityAnalysis, TestabilityRecord

logger = logging.getLogger(__name__)

DEFAULT_HARD_FAULTS = 100


class FaultStatus(Enum):
    """ATPG outcome attached to a fault"""
    UNTRIED = "UNTRIED"
    DETECTED = "DETECTED"
    UNTESTABLE = "UNTESTABLE"
    ABORTED = "ABORTED"


@dataclass(frozen=True)
class Fault:
    """Stuck-at fault on a net stem"""
    net: int
    stuck_at: int
    p_detect: float = 0.0
    status: FaultStatus = FaultStatus.UNTRIED

    def __post_init__(self):
        if self.stuck_at not in (0, 1):
            raise ValidationError(f"stuck_at must be 0 or 1, got {self.stuck_at!r}")

    @property
    def key(self) -> tuple:
        return (self.net, self.stuck_at)

    def with_status(self, status: FaultStatus) -> "Fault":
        """Terminal outcome for an untried fault"""
        if self.status is not FaultStatus.UNTRIED:
            raise EngineStateError(f"Fault {self.key} already has status {self.status.value}")
        if status is FaultStatus.UNTRIED:
            raise EngineStateError("A fault cannot transition back to UNTRIED")
        return replace(self, status=status)

    def label(self, circuit: Circuit) -> str:
        return f"{circuit.nets[self.net].name}/sa{self.stuck_at}"


def enumerate_faults(circuit: Circuit) -> List[Fault]:
    """Both polarities on every net, in net-id order"""
    return [Fault(net=net.id, stuck_at=v) for net in circuit.nets for v in (0, 1)]


def detection_probability(fault: Fault, testability: TestabilityRecord) -> float:
    """cc * co for stuck-at-0, (1 - cc) * co for stuck-at-1"""
    if fault.stuck_at == 0:
        return testability.cc * testability.co
    return (1.0 - testability.cc) * testability.co


def annotate(faults: Iterable[Fault], analysis: TestabilityAnalysis) -> List[Fault]:
    """Fill p_detect from the COP measures"""
    return [replace(f, p_detect=detection_probability(f, analysis.record(f.net))) for f in faults]


def _rank_key(fault: Fault) -> tuple:
    return (fault.p_detect, fault.net, fault.stuck_at)


def rank_hard_faults(faults: Sequence[Fault], k: int = DEFAULT_HARD_FAULTS) -> List[Fault]:
    """Lowest detection probability first; ties by (net id, stuck_at)"""
    if k < 1:
        raise ValidationError(f"k must be a positive integer, got {k}")
    return sorted(faults, key=_rank_key)[:k]


def select_random_faults(faults: Sequence[Fault], k: int, seed: int) -> List[Fault]:
    """Uniform sample without replacement, returned in fault-list order"""
    if k < 1:
        raise ValidationError(f"k must be a positive integer, got {k}")
    if k >= len(faults):
        return list(faults)
    rng = SeedStreams(seed).rng("faults.random")
    picked = sorted(int(i) for i in rng.choice(len(faults), size=k, replace=False))
    return [faults[i] for i in picked]


# =============================================================================
# CSV INTERFACE
# =============================================================================

FAULT_CSV_HEADER = ('net', 'stuck_at', 'p_detect', 'status')


def write_faults_csv(path: Union[str, Path], circuit: Circuit, faults: Sequence[Fault]) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(FAULT_CSV_HEADER)
        for fault in faults:
            writer.writerow([circuit.nets[fault.net].name, fault.stuck_at, repr(fault.p_detect), fault.status.value])


def read_faults_csv(path: Union[str, Path], circuit: Circuit) -> List[Fault]:
    """Read a fault list; p_detect and status columns are optional"""
    faults = []
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if not reader.fieldnames or not {'net', 'stuck_at'} <= set(reader.fieldnames):
            raise DataFormatError(f"{path}: fault list needs at least 'net' and 'stuck_at' columns")
        for line_no, row in enumerate(reader, start=2):
            try:
                stuck_at = int(row['stuck_at'])
                p_detect = float(row.get('p_detect') or 0.0)
                status = FaultStatus(row.get('status') or FaultStatus.UNTRIED.value)
            except ValueError as e:
                raise DataFormatError(f"{path}:{line_no}: {e}") from None
            if stuck_at not in (0, 1):
                raise DataFormatError(f"{path}:{line_no}: stuck_at must be 0 or 1")
            faults.append(Fault(net=circuit.net_id(row['net']), stuck_at=stuck_at, p_detect=p_detect, status=status))
    logger.debug(f"Read {len(faults)} faults from {path}")
    return faults
