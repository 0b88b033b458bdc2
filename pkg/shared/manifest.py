"""
Self-describing run manifests.

A manifest records the tool version, the command, its seed, a SHA-256 over the
canonical JSON of its configuration and a SHA-256 per output file. After the
manifest is written its own hash is appended under ``hashes.manifest_sha256``.
"""

import hashlib
import json
import os
from typing import Any, Dict, Optional

from .constants import TOOL_NAME, TOOL_VERSION
from .output_utils import write_json_document


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(config: Dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(
    path: str,
    command: str,
    seed: Optional[int],
    config: Dict[str, Any],
    files: Dict[str, str],
    extra: Optional[Dict[str, Any]] = None,
) -> str:
    """
    Write a manifest next to a command's outputs.

    Args:
        path: Manifest file
        command: Command name
        seed: Master seed of the run
        config: Plain-JSON configuration the run used
        files: Output files by role (paths that exist are hashed)
        extra: Additional top-level fields (e.g. the instance spec hash)

    Returns:
        The manifest path
    """
    manifest = {
        "tool": TOOL_NAME,
        "tool_version": TOOL_VERSION,
        "command": command,
        "seed": seed,
        "config": config,
        "files": {role: os.path.basename(p) for role, p in sorted(files.items())},
        "hashes": {
            "config_sha256": config_hash(config),
            "files": {role: file_sha256(p) for role, p in sorted(files.items()) if os.path.exists(p)},
        },
    }
    manifest.update(extra or {})
    write_json_document(path, manifest)

    # Hash the manifest itself and append
    manifest_sha256 = file_sha256(path)
    manifest["hashes"] = dict(manifest["hashes"], manifest_sha256=manifest_sha256)
    return write_json_document(path, manifest)


def verify_manifest(path: str) -> bool:
    """Recompute the self-hash of a manifest written by :func:`write_manifest`."""
    with open(path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    recorded = manifest.get("hashes", {}).pop("manifest_sha256", None)
    if recorded is None:
        return False
    directory = os.path.dirname(path)
    tmp = os.path.join(directory, "." + os.path.basename(path) + ".verify")
    try:
        write_json_document(tmp, manifest)
        return file_sha256(tmp) == recorded
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
