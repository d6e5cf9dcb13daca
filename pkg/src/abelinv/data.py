"""Synthetic corpus generation and dataset persistence.

Raw signals are random mixtures of a few positive bumps, smoothed with a
Savitzky-Golay filter, blended toward a constant at t = 0 and toward
zero at t = 1, and projected onto the retained eigenbasis.  Noisy data
are synthesized by the discrete forward operator plus rescaled white
noise.  A CSV ingestion path accepts user-provided raw signals instead
of the bump generator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import savgol_filter

from abelinv.core import AbelSystem, make_noisy_data, to_eigen, to_elt


@dataclass
class DatasetSpec:
    n_train: int = 400
    n_val: int = 200
    noise_frac: float = 0.05
    a: float = 1.0
    seed: int = 0
    source: str = "synthetic-mixture"  # or "csv-ingest"
    raw_csv: str | None = None

    def __post_init__(self):
        if self.n_train < 0 or self.n_val < 0:
            raise ValueError("record counts must be nonnegative")
        if self.noise_frac < 0:
            raise ValueError("noise_frac must be nonnegative")
        if self.source not in ("synthetic-mixture", "csv-ingest"):
            raise ValueError(f"unknown source {self.source!r}")
        if self.source == "csv-ingest" and not self.raw_csv:
            raise ValueError("csv-ingest needs a raw_csv path")


@dataclass
class SignalRecord:
    record_id: str
    x_eigen: np.ndarray
    x_elt: np.ndarray
    y_noisy: np.ndarray
    delta: float


def savgol_smooth(v: np.ndarray, window: int = 21, order: int = 5) -> np.ndarray:
    """Least-squares polynomial smoothing, boundary windows refit at the ends."""
    v = np.asarray(v, dtype=float)
    if window % 2 != 1:
        raise ValueError("window length must be odd")
    if order >= window:
        raise ValueError("polynomial order must be below the window length")
    if v.size < window:
        raise ValueError("signal shorter than the filter window")
    return savgol_filter(v, window, order, mode="interp")


def _bump_parameters(rng: np.random.Generator):
    """Component count, centers, widths, heights of one raw mixture.

    Widths stay in (0.02, 0.2): most components are broad (so the corpus
    is dominated by the leading eigenmodes), a minority are narrow
    "detail" bumps that populate the spectral tail the inversion methods
    have to contend with.
    """
    count = int(rng.integers(2, 5))
    centers = rng.uniform(0.1, 0.9, count)
    narrow = rng.random(count) < 0.18
    widths = np.where(narrow,
                      rng.uniform(0.02, 0.028, count),
                      0.06 + 0.14 * rng.random(count) ** 0.5)
    heights = rng.uniform(0.2, 1.0, count)
    return count, centers, widths, heights


def generate_raw(seed, n: int) -> np.ndarray:
    """Positive bump-mixture signal on the n-point grid, max-normalized."""
    if n < 42:
        raise ValueError("need at least twice the filter window of samples")
    rng = np.random.default_rng(seed)
    _, centers, widths, heights = _bump_parameters(rng)
    t = np.linspace(0.0, 1.0, n)
    y = np.zeros(n)
    for c, w, hgt in zip(centers, widths, heights):
        y += hgt * np.exp(-0.5 * ((t - c) / w) ** 2)
    return y / y.max()


def regularize_signal(raw: np.ndarray, system: AbelSystem) -> np.ndarray:
    """Smooth, pad toward the eigenbasis boundary behavior, and project.

    The leading samples are cosine-blended toward the smoothed value at
    the pad boundary (flat start), the trailing samples toward zero, then
    the result is projected onto the K retained eigenvectors.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (system.n,):
        raise ValueError(f"raw signal must have {system.n} samples")
    v = savgol_smooth(raw)
    pad = max(system.n // 20, 2)
    ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(pad) / pad))
    head = v[pad]
    v = v.copy()
    v[:pad] = (1.0 - ramp) * head + ramp * v[:pad]
    tail_ramp = 0.5 * (1.0 + np.cos(np.pi * (np.arange(pad) + 1.0) / pad))
    v[system.n - pad :] = tail_ramp * v[system.n - pad :]
    return to_eigen(v, system)


def _record(raw: np.ndarray, record_id: str, noise_seed, spec: DatasetSpec,
            system: AbelSystem) -> SignalRecord:
    x_eigen = regularize_signal(raw, system)
    x_elt = to_elt(x_eigen, system)
    _, y_noisy, delta = make_noisy_data(x_elt, system, spec.noise_frac, noise_seed)
    return SignalRecord(record_id=record_id, x_eigen=x_eigen, x_elt=x_elt,
                        y_noisy=y_noisy, delta=delta)


def make_dataset(spec: DatasetSpec, system: AbelSystem):
    """Build (train, val) record lists from disjoint seeded streams."""
    root = np.random.SeedSequence(spec.seed)
    train_ss, val_ss = root.spawn(2)
    if spec.source == "csv-ingest":
        raws = read_raw_csv(spec.raw_csv, system.n)
        need = spec.n_train + spec.n_val
        if len(raws) < need:
            raise ValueError(f"ingest file holds {len(raws)} rows, need {need}")
    out = {}
    offset = 0
    for kind, count, stream in (("train", spec.n_train, train_ss), ("val", spec.n_val, val_ss)):
        children = stream.spawn(count)
        records = []
        for idx, child in enumerate(children):
            raw_seed, noise_seed = child.generate_state(2, dtype=np.uint64)
            if spec.source == "synthetic-mixture":
                raw = generate_raw(int(raw_seed), system.n)
            else:
                raw = raws[offset + idx]
            records.append(_record(raw, f"{kind}-{idx:04d}", int(noise_seed), spec, system))
        out[kind] = records
        offset += count
    return out["train"], out["val"]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_dataset_csv(path, train, val, system: AbelSystem) -> None:
    n, k = system.n, system.k
    header = (["record_id", "kind"]
              + [f"y_{i}" for i in range(n)]
              + [f"x_{i}" for i in range(k)]
              + ["delta"])
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for kind, records in (("train", train), ("val", val)):
            for rec in records:
                row = ([rec.record_id, kind]
                       + [_fmt(v) for v in rec.y_noisy]
                       + [_fmt(v) for v in rec.x_eigen]
                       + [_fmt(rec.delta)])
                writer.writerow(row)


def read_dataset_csv(path, system: AbelSystem):
    n, k = system.n, system.k
    train, val = [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if len(header) != 3 + n + k:
            raise ValueError("dataset file does not match the system dimensions")
        for row in reader:
            record_id, kind = row[0], row[1]
            y = np.array([float(v) for v in row[2 : 2 + n]])
            x = np.array([float(v) for v in row[2 + n : 2 + n + k]])
            delta = float(row[-1])
            rec = SignalRecord(record_id=record_id, x_eigen=x,
                               x_elt=to_elt(x, system), y_noisy=y, delta=delta)
            (train if kind == "train" else val).append(rec)
    return train, val


def read_raw_csv(path, n: int):
    """One raw signal per row, n columns."""
    raws = []
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row:
                continue
            vals = np.array([float(v) for v in row])
            if vals.size != n:
                raise ValueError(f"ingest rows must have {n} columns, got {vals.size}")
            raws.append(vals)
    return raws
