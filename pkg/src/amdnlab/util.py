"""Shared helpers: seeded RNG streams, file hashing, canonical JSON."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic RNG for a named substream of a base seed.

    Distinct ``stream`` tuples give statistically independent streams, so
    subsystems (dataset gen, training, each adversary) never share state.
    """
    return np.random.default_rng(np.random.SeedSequence((int(seed), *map(int, stream))))


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def canonical_json(obj) -> str:
    """Stable JSON encoding (sorted keys, no whitespace drift) for hashing and manifests."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def fmt_float(x: float) -> str:
    """Decimal form with 17 significant digits; round-trips float64 exactly."""
    return format(float(x), ".17g")
