"""Run manifests: one ``manifest.json`` per output directory."""
from __future__ import annotations

import hashlib
import json
import os
import time
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Collects parameters, digests and outputs while a subcommand runs."""

    def __init__(self, subcommand: str, params: dict, version: str):
        self.subcommand = subcommand
        self.params = params
        self.version = version
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self._start = time.perf_counter()

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path, out_dir) -> None:
        rel = os.path.relpath(path, out_dir)
        self.outputs[rel] = sha256_file(path)

    def to_dict(self) -> dict:
        return {
            "tool": "humask",
            "version": self.version,
            "subcommand": self.subcommand,
            "params": self.params,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "duration_s": round(time.perf_counter() - self._start, 6),
        }

    def write(self, out_dir) -> Path:
        """Write atomically (temp file + rename) as the last step of a run."""
        out_dir = Path(out_dir)
        final = out_dir / MANIFEST_NAME
        tmp = out_dir / (MANIFEST_NAME + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        os.replace(tmp, final)
        return final


def verify_manifest(out_dir) -> list[str]:
    """Digest mismatches and missing files for a manifest's outputs."""
    out_dir = Path(out_dir)
    doc = json.loads((out_dir / MANIFEST_NAME).read_text())
    problems = []
    for rel, digest in doc["outputs"].items():
        path = out_dir / rel
        if not path.exists():
            problems.append(f"missing output {rel}")
        elif sha256_file(path) != digest:
            problems.append(f"digest mismatch for {rel}")
    for src, digest in doc["inputs"].items():
        if Path(src).exists() and sha256_file(src) != digest:
            problems.append(f"input {src} changed since the run")
    return problems
