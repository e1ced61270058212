#!/usr/bin/env python3
"""
Run manifests
Every command records what it read, how it was invoked and digests of what it wrote.
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from core_utils import TOOL_VERSION, DataFormatError

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


def file_digest(path: Union[str, Path]) -> str:
    """SHA-256 of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    """Invocation record written next to a command's outputs"""
    command: str
    inputs: List[str]
    seed: int
    flags: Dict[str, Any]
    tool_version: str = TOOL_VERSION
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None
    input_digests: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for path in self.inputs:
            if Path(path).is_file():
                self.input_digests[str(path)] = file_digest(path)

    def record_output(self, path: Union[str, Path]) -> None:
        self.outputs[Path(path).name] = file_digest(path)

    def finish(self) -> None:
        self.finished_at = _now()

    @property
    def path_name(self) -> str:
        return f"{self.command}{MANIFEST_SUFFIX}"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def write(self, out_dir: Union[str, Path]) -> Path:
        """Finish the run if needed and write <command>.manifest.json into out_dir"""
        if self.finished_at is None:
            self.finish()
        path = Path(out_dir) / self.path_name
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, default=str)
            f.write("\n")
        logger.debug(f"Manifest written to {path}")
        return path


def read_manifest(path: Union[str, Path]) -> RunManifest:
    try:
        with open(path, encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid manifest: {e}") from None
    digests = data.pop('input_digests', {})
    try:
        manifest = RunManifest(**data)
    except TypeError as e:
        raise DataFormatError(f"{path}: invalid manifest: {e}") from None
    manifest.input_digests = digests
    return manifest
