#!/usr/bin/env python3
"""
Input validation for the HybMT command line
Parses fault, heuristic and grid specifications and checks paths.
"""

import itertools
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from core_utils import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FaultSpec:
    """Parsed --faults value"""
    mode: str
    k: Optional[int] = None
    seed: Optional[int] = None
    path: Optional[Path] = None


@dataclass(frozen=True)
class HeuristicSpec:
    """Parsed --heuristic value"""
    kind: str
    path: Optional[Path] = None


class InputValidator:
    """Validation and parsing of command-line values"""

    HEURISTIC_KINDS = ('cop', 'model', 'meta')
    GRID_PARAMETERS = {
        'hybnn': ('learning_rate', 'hidden_extractor', 'hidden_regressor', 'epochs', 'batch_size'),
        'svr': ('C', 'epsilon', 'gamma'),
        'meta': ('n_trees', 'max_features', 'min_samples_split', 'max_depth'),
    }
    _LOGSPACE = re.compile(r'^logspace\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*,\s*(\d+)\s*\)$')

    @staticmethod
    def validate_positive_int(value: Union[int, str], name: str = "value") -> int:
        """Validate a strictly positive integer"""
        try:
            number = int(value)
        except (ValueError, TypeError):
            raise ValidationError(f"{name} must be an integer, got {value!r}") from None
        if number < 1:
            raise ValidationError(f"{name} must be positive, got {number}")
        return number

    @staticmethod
    def validate_probability(value: Union[float, str], name: str = "value") -> float:
        """Validate a real in [0, 1]"""
        try:
            number = float(value)
        except (ValueError, TypeError):
            raise ValidationError(f"{name} must be numeric, got {value!r}") from None
        if not 0.0 <= number <= 1.0:
            raise ValidationError(f"{name} {number} not in range [0, 1]")
        return number

    @staticmethod
    def parse_fault_spec(spec: str, default_seed: int = 0) -> FaultSpec:
        """
        Parse a fault selection

        Accepted forms: hard:K, random:K, random:K:SEED, all, file:PATH
        """
        spec = (spec or '').strip()
        if spec == 'all':
            return FaultSpec(mode='all')
        mode, _, rest = spec.partition(':')
        if mode == 'hard':
            return FaultSpec(mode='hard', k=InputValidator.validate_positive_int(rest, "hard fault count"))
        if mode == 'random':
            count, _, seed = rest.partition(':')
            k = InputValidator.validate_positive_int(count, "random fault count")
            try:
                seed_value = int(seed) if seed else default_seed
            except ValueError:
                raise ValidationError(f"Random fault seed must be an integer, got {seed!r}") from None
            return FaultSpec(mode='random', k=k, seed=seed_value)
        if mode == 'file' and rest:
            return FaultSpec(mode='file', path=PathValidator.require_file(rest))
        raise ValidationError(f"Invalid fault spec {spec!r}; expected hard:K, random:K[:SEED], all or file:PATH")

    @staticmethod
    def parse_heuristic_spec(spec: str) -> HeuristicSpec:
        """Parse cop, model:PATH or meta:PATH"""
        spec = (spec or '').strip()
        if spec == 'cop':
            return HeuristicSpec(kind='cop')
        kind, _, path = spec.partition(':')
        if kind in ('model', 'meta') and path:
            return HeuristicSpec(kind=kind, path=PathValidator.require_file(path))
        raise ValidationError(f"Invalid heuristic {spec!r}; expected cop, model:PATH or meta:PATH")

    @staticmethod
    def _grid_values(name: str, text: str) -> List[Any]:
        match = InputValidator._LOGSPACE.match(text.strip())
        if match:
            low, high, count = float(match.group(1)), float(match.group(2)), int(match.group(3))
            if count < 1:
                raise ValidationError(f"Grid parameter {name}: logspace needs at least one point")
            return [float(v) for v in np.logspace(low, high, count)]

        values: List[Any] = []
        for token in text.split(','):
            token = token.strip()
            if not token:
                raise ValidationError(f"Grid parameter {name} has an empty value")
            if token in ('none', 'null'):
                values.append(None)
                continue
            if token == 'scale':
                values.append(token)
                continue
            try:
                values.append(int(token))
            except ValueError:
                try:
                    values.append(float(token))
                except ValueError:
                    raise ValidationError(f"Grid parameter {name}: {token!r} is not a number") from None
        return values

    @staticmethod
    def parse_grid(spec: Optional[str], family: str) -> List[Dict[str, Any]]:
        """
        Parse a hyperparameter grid such as "C=logspace(-3,4,8);epsilon=0.05,0.1"

        Returns:
            Grid points in row-major order of the named parameters (first parameter slowest)
        """
        allowed = InputValidator.GRID_PARAMETERS.get(family)
        if allowed is None:
            raise ValidationError(f"Unknown model family {family!r}")
        if not spec or not spec.strip():
            return [{}]

        names: List[str] = []
        axes: List[List[Any]] = []
        for part in spec.split(';'):
            if not part.strip():
                continue
            name, sep, text = part.partition('=')
            name = name.strip()
            if not sep:
                raise ValidationError(f"Grid entry {part!r} must look like name=v1,v2")
            if name not in allowed:
                raise ValidationError(f"{name!r} is not a {family} hyperparameter; choose from {list(allowed)}")
            if name in names:
                raise ValidationError(f"Grid parameter {name} given twice")
            names.append(name)
            axes.append(InputValidator._grid_values(name, text))

        return [dict(zip(names, point)) for point in itertools.product(*axes)]


class PathValidator:
    """File and directory checks"""

    @staticmethod
    def require_file(path: Union[str, Path]) -> Path:
        """Return the path if it names an existing file"""
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"No such file: {path}")
        return path

    @staticmethod
    def ensure_out_dir(path: Union[str, Path]) -> Path:
        """Create the output directory if needed"""
        path = Path(path)
        if path.exists() and not path.is_dir():
            raise ValidationError(f"Output path {path} exists and is not a directory")
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def is_safe_filename(filename: str) -> bool:
        """Check a bare output file name (no directories, no reserved characters)"""
        if not filename or filename in ('.', '..'):
            return False
        if '/' in filename or '\\' in filename:
            return False
        dangerous_chars = ['<', '>', ':', '"', '|', '?', '*', '\x00']
        return not any(char in filename for char in dangerous_chars)
