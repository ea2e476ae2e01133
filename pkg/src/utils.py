"""
Utility functions for the leverage regulation simulator.

This module contains the file and configuration helpers used by the runner
and the command line interface.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
import yaml

from config.config import WORKERS_ENV_VAR


def assure_path_exists(path: Path) -> None:
    """
    Ensure that the parent directory of a file exists, creating it if necessary.

    Args:
        path: Path to the file
    """
    directory = Path(path).parent
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"Cannot create directory {directory}: {e}") from e


def config_hash(payload: Dict[str, Any]) -> str:
    """Short stable digest of a JSON-serializable configuration."""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def write_table(frame: pd.DataFrame, path: Path, manifest: Dict[str, Any]) -> Path:
    """
    Atomically write a CSV table preceded by '#'-prefixed manifest lines.

    Args:
        frame: Table to write
        path: Destination file
        manifest: Key/value provenance written as the header

    Returns:
        The destination path

    Raises:
        OSError: Naming the offending path
    """
    path = Path(path)
    assure_path_exists(path)
    header = "".join(f"# {key}={value}\n" for key, value in manifest.items())
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", newline="") as f:
            f.write(header)
            frame.to_csv(f, index=False, lineterminator="\n")
        os.replace(tmp, path)
    except OSError as e:
        raise OSError(f"Failed to write {path}: {e}") from e
    return path


def read_manifest(path: Path) -> Dict[str, str]:
    """Read only the '#'-prefixed header of a table written by write_table."""
    manifest = {}
    with open(path, "r") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            manifest[key] = value
    return manifest


def read_table(path: Path) -> Tuple[pd.DataFrame, Dict[str, str]]:
    """
    Read a table written by write_table.

    Returns:
        Tuple of (table, manifest)

    Raises:
        OSError: Naming the offending path
    """
    path = Path(path)
    try:
        manifest = read_manifest(path)
        frame = pd.read_csv(path, skiprows=len(manifest), float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        raise OSError(f"Failed to read {path}: {e}") from e
    return frame, manifest


def load_yaml(path: Path) -> Dict[str, Any]:
    """Load a YAML mapping; an empty file yields an empty mapping."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise OSError(f"Failed to read {path}: {e}") from e
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ValueError(f"{path} must contain a mapping at the top level")
    return raw


def parse_override(text: str) -> Tuple[List[str], Any]:
    """
    Parse a flat dotted override such as 'params.sigma_n=0.03'.

    The value is read with YAML scalar rules, so numbers, booleans and
    lists are typed.
    """
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ValueError(f"Override '{text}' must look like key.path=value")
    return key.strip().split("."), yaml.safe_load(value)


def apply_overrides(raw: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Set each dotted key path of the overrides in a nested mapping."""
    for text in overrides:
        keys, value = parse_override(text)
        node = raw
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ValueError(f"Override '{text}' descends into a non-mapping value")
        node[keys[-1]] = value
    return raw


def resolve_workers(flag: Optional[int], configured: Optional[int]) -> int:
    """Worker count: command line flag, then environment variable, then config, then 1."""
    if flag:
        return max(1, int(flag))
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{WORKERS_ENV_VAR} must be an integer, got '{env}'") from None
    return max(1, int(configured or 1))
