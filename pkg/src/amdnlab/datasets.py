"""Transition storage, normalization, deterministic splits, and CSV round-trip.

A dataset is column-oriented (numpy arrays) with an (episode, step) identity
per row. Collision datasets are made of contiguous 25-row windows and are split
window-by-window so validation never sees part of a training collision.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .simulator import Observation
from .util import fmt_float, read_json, write_json

WINDOW_LEN = 25

V_SCALE = 40.0
V_REL_SCALE = 20.0
T_H_SCALE = 10.0


class DatasetFormatError(ValueError):
    """Malformed or out-of-range dataset content; message names the CSV line."""


@dataclass(frozen=True)
class Transition:
    v: float
    v_rel: float
    t_h: float
    action: float


@dataclass
class Dataset:
    episode: np.ndarray
    step: np.ndarray
    v: np.ndarray
    v_rel: np.ndarray
    t_h: np.ndarray
    action: np.ndarray
    provenance: str = "expert"
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.action)
        for name in ("episode", "step", "v", "v_rel", "t_h"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} length mismatch")
        if self.provenance not in ("expert", "collision"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self) -> int:
        return len(self.action)

    def transition(self, i: int) -> Transition:
        return Transition(float(self.v[i]), float(self.v_rel[i]),
                          float(self.t_h[i]), float(self.action[i]))

    def validate(self) -> None:
        """Enforce row invariants plus whole-window structure for collision data."""
        if np.any((self.action < -1.0) | (self.action > 1.0)):
            bad = int(np.argmax((self.action < -1.0) | (self.action > 1.0)))
            raise DatasetFormatError(f"row {bad}: action {self.action[bad]} outside [-1, 1]")
        if np.any((self.t_h < 0.0) | (self.t_h > T_H_SCALE)):
            bad = int(np.argmax((self.t_h < 0.0) | (self.t_h > T_H_SCALE)))
            raise DatasetFormatError(f"row {bad}: t_h {self.t_h[bad]} outside [0, {T_H_SCALE}]")
        if self.provenance == "collision" and len(self) % WINDOW_LEN != 0:
            raise DatasetFormatError(
                f"collision dataset length {len(self)} not divisible by {WINDOW_LEN}")

    def features(self) -> np.ndarray:
        """Normalized (N, 3) observation matrix for network input."""
        return normalize_arrays(self.v, self.v_rel, self.t_h)


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray


def normalize_arrays(v, v_rel, t_h) -> np.ndarray:
    cols = (np.asarray(v, dtype=float) / V_SCALE,
            np.asarray(v_rel, dtype=float) / V_REL_SCALE,
            np.asarray(t_h, dtype=float) / T_H_SCALE)
    return np.clip(np.stack(cols, axis=-1), -1.0, 1.0)


def normalize(obs: Observation) -> np.ndarray:
    """Scale an observation triple into [-1, 1]^3 network inputs."""
    return normalize_arrays(obs.v, obs.v_rel, obs.t_h)


def split_80_20(ds: Dataset, seed: int) -> Split:
    """Seeded shuffle split, 80% train by round(); collision data splits by whole
    25-row windows."""
    n = len(ds)
    if n < 5:
        raise ValueError(f"dataset of {n} rows is too small to split")
    rng = np.random.default_rng(seed)
    if ds.provenance == "collision":
        ds.validate()
        n_windows = n // WINDOW_LEN
        order = rng.permutation(n_windows)
        n_train_w = round(0.8 * n_windows)
        to_rows = lambda ws: np.concatenate(
            [np.arange(w * WINDOW_LEN, (w + 1) * WINDOW_LEN) for w in ws]) if len(ws) else np.array([], dtype=int)
        return Split(to_rows(order[:n_train_w]), to_rows(order[n_train_w:]))
    order = rng.permutation(n)
    n_train = round(0.8 * n)
    return Split(order[:n_train], order[n_train:])


CSV_HEADER = ["episode", "step", "v", "v_rel", "t_h", "action"]


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Write the dataset plus a JSON sidecar with provenance, seed, and metadata."""
    ds.validate()
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for i in range(len(ds)):
            writer.writerow([int(ds.episode[i]), int(ds.step[i]),
                             fmt_float(ds.v[i]), fmt_float(ds.v_rel[i]),
                             fmt_float(ds.t_h[i]), fmt_float(ds.action[i])])
    write_json(path.with_name(path.name + ".meta.json"),
               {"provenance": ds.provenance, "seed": ds.seed, **ds.meta})


def read_csv(path: str | Path) -> Dataset:
    """Read a dataset CSV; a malformed or out-of-range row fails with its line number."""
    path = Path(path)
    cols: list[list] = [[] for _ in CSV_HEADER]
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise DatasetFormatError(f"line 1: expected header {CSV_HEADER}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise DatasetFormatError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                values = [int(row[0]), int(row[1])] + [float(x) for x in row[2:]]
            except ValueError as e:
                raise DatasetFormatError(f"line {lineno}: {e}") from None
            if not -1.0 <= values[5] <= 1.0:
                raise DatasetFormatError(f"line {lineno}: action {values[5]} outside [-1, 1]")
            if not 0.0 <= values[4] <= T_H_SCALE:
                raise DatasetFormatError(f"line {lineno}: t_h {values[4]} outside [0, {T_H_SCALE}]")
            for c, val in zip(cols, values):
                c.append(val)

    meta_path = path.with_name(path.name + ".meta.json")
    meta = read_json(meta_path) if meta_path.exists() else {}
    return Dataset(
        episode=np.asarray(cols[0], dtype=int),
        step=np.asarray(cols[1], dtype=int),
        v=np.asarray(cols[2], dtype=float),
        v_rel=np.asarray(cols[3], dtype=float),
        t_h=np.asarray(cols[4], dtype=float),
        action=np.asarray(cols[5], dtype=float),
        provenance=meta.pop("provenance", "expert"),
        seed=meta.pop("seed", 0),
        meta=meta,
    )


def from_rows(rows: list[tuple[int, int, Observation, float]], provenance: str,
              seed: int, meta: dict | None = None) -> Dataset:
    """Build a dataset from (episode, step, observation, action) records."""
    if rows:
        ep, st, obs, act = zip(*rows)
        return Dataset(np.asarray(ep, dtype=int), np.asarray(st, dtype=int),
                       np.asarray([o.v for o in obs]), np.asarray([o.v_rel for o in obs]),
                       np.asarray([o.t_h for o in obs]), np.asarray(act, dtype=float),
                       provenance, seed, meta or {})
    empty_f = np.zeros(0)
    empty_i = np.zeros(0, dtype=int)
    return Dataset(empty_i, empty_i, empty_f, empty_f, empty_f, empty_f,
                   provenance, seed, meta or {})
