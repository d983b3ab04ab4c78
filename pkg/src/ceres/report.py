"""Deterministic CSV/JSON emission for experiment runs.

Every CSV starts with a comment line carrying the config hash and seed;
rows are RFC 4180 quoted.  JSON summaries are sorted and indent-stable.
Nothing time-dependent is ever written, so identical configs reproduce
identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path


def config_hash(semantic: dict) -> str:
    blob = json.dumps(semantic, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _plain(value):
    """Coerce numpy scalars/containers to JSON-native types."""
    if hasattr(value, "item") and not hasattr(value, "__len__"):
        return value.item()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "tolist"):
        return value.tolist()
    return value


def write_csv(path, header, rows, cfg_hash: str, seed: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config={cfg_hash} seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_plain(v) for v in row])


def write_json(path, doc: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_csv(path):
    """Read back a report CSV; returns (comment, header, rows-of-strings)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        comment = fh.readline().rstrip("\n")
        reader = csv.reader(fh)
        header = next(reader)
        return comment, header, [row for row in reader]
