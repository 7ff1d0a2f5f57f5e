"""Output plumbing shared by the commands: atomic writes, config hashing,
run manifests."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__

MANIFEST_NAME = "manifest.json"


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _normalize(value):
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, float)):
        f = float(value)
        if not math.isfinite(f):
            raise ValueError(f"non-finite number in config: {value!r}")
        return repr(f)
    if isinstance(value, dict):
        return {str(k): _normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    return str(value)


def canonical_json(config: dict) -> str:
    """Sorted keys, numbers as float reprs, so 1 and 1.0 hash alike."""
    return json.dumps(_normalize(config), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    tool_version: str
    started: float
    finished: float
    config: dict
    artifacts: dict
    extra: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def write_manifest(out_dir: Path, command: str, config: dict, seed: int, started: float,
                   artifacts: list[str], extra: dict | None = None) -> Path:
    digests = {name: file_digest(out_dir / name) for name in sorted(artifacts)}
    manifest = RunManifest(
        command=command,
        config_hash=config_hash(config),
        seed=seed,
        tool_version=__version__,
        started=started,
        finished=time.time(),
        config=config,
        artifacts=digests,
        extra=extra or {},
    )
    path = out_dir / MANIFEST_NAME
    atomic_write_text(path, manifest.to_json())
    return path
