"""Input signals, NARMA targets and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DIVERGENCE_LIMIT = 1e6


class NarmaDivergenceError(ArithmeticError):
    pass


class CsvSchemaError(ValueError):
    pass


def gen_input(
    length: int,
    alpha: float = 2.11,
    beta: float = 3.73,
    gamma: float = 4.11,
    period: float = 100.0,
) -> np.ndarray:
    """u_t = 0.1 (sin(2 pi alpha t/T) sin(2 pi beta t/T) sin(2 pi gamma t/T) + 1).

    Values lie in [0, 0.2] and t starts at 0.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    t = np.arange(length, dtype=float)
    w = 2.0 * np.pi * t / period
    return 0.1 * (np.sin(alpha * w) * np.sin(beta * w) * np.sin(gamma * w) + 1.0)


def iid_input(length: int, symmetric: bool, rng: np.random.Generator) -> np.ndarray:
    """Uniform i.i.d. input on [-1, 1] (symmetric) or [0, 1]."""
    lo = -1.0 if symmetric else 0.0
    return rng.uniform(lo, 1.0, size=length)


@dataclass(frozen=True)
class NarmaSpec:
    """NARMA recursion.

    ``order == 2``:
        y[t+1] = 0.4 y[t] + 0.4 y[t] y[t-1] + 0.6 u[t]^3 + 0.1
    otherwise (n = order):
        y[t+1] = alpha y[t] + beta y[t] sum_{i<n} y[t-i] + gamma u[t-n+1] u[t] + delta

    Every history value before t = 0 (of y and of u) is zero, and y[0] = 0.
    """

    order: int = 2
    alpha: float = 0.3
    beta: float = 0.05
    gamma: float = 1.5
    delta: float = 0.1

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("NARMA order must be >= 2")

    @classmethod
    def named(cls, name: str) -> "NarmaSpec":
        name = name.lower()
        if not name.startswith("narma"):
            raise ValueError(f"unknown NARMA task {name!r}")
        return cls(order=int(name[5:]))


def gen_narma(u, spec: NarmaSpec | int = 2) -> np.ndarray:
    """Target sequence aligned with ``u``: ``y[t+1]`` responds to ``u[t]``."""
    if isinstance(spec, int):
        spec = NarmaSpec(order=spec)
    u = np.asarray(u, dtype=float).ravel()
    n = spec.order
    if len(u) < n:
        raise ValueError(f"need at least {n} inputs for NARMA{n}")
    y = np.zeros(len(u))
    for t in range(len(u) - 1):
        yt = y[t]
        if n == 2:
            y_prev = y[t - 1] if t >= 1 else 0.0
            nxt = 0.4 * yt + 0.4 * yt * y_prev + 0.6 * u[t] ** 3 + 0.1
        else:
            window = y[max(0, t - n + 1) : t + 1].sum()
            u_lag = u[t - n + 1] if t - n + 1 >= 0 else 0.0
            nxt = spec.alpha * yt + spec.beta * yt * window + spec.gamma * u_lag * u[t] + spec.delta
        if not math.isfinite(nxt) or abs(nxt) > DIVERGENCE_LIMIT:
            raise NarmaDivergenceError(f"NARMA{n} diverged at t={t + 1} (|y| > {DIVERGENCE_LIMIT:g})")
        y[t + 1] = nxt
    return y


@dataclass
class SeriesBundle:
    u: np.ndarray
    y: np.ndarray
    t: np.ndarray
    washout: int = 0
    train_end: int = 0
    test_end: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.u) == len(self.y) == len(self.t)):
            raise ValueError("u, y and t must have equal lengths")
        self.set_split(self.washout, self.train_end, self.test_end)

    def set_split(self, washout: int, train_end: int, test_end: int) -> None:
        if not 0 <= washout < train_end < test_end <= len(self.u):
            raise ValueError(
                f"invalid split washout={washout} train_end={train_end} "
                f"test_end={test_end} for length {len(self.u)}"
            )
        self.washout, self.train_end, self.test_end = washout, train_end, test_end

    def __len__(self) -> int:
        return len(self.u)


def default_split(length: int, washout: int = 100, train_end: int = 800, test_end: int = 1000):
    """Clamp the (100, 800, 1000) soft-robot split to a shorter series."""
    test_end = min(test_end, length)
    train_end = min(train_end, test_end - 1)
    washout = min(washout, train_end - 1)
    return max(washout, 0), train_end, test_end


def load_csv(
    path: str | Path,
    normalize: bool = False,
    split: tuple[int, int, int] | None = None,
) -> SeriesBundle:
    """Read a ``t,u,y`` CSV (UTF-8, header row, one timestep per row).

    With ``normalize=True`` the input column is min-max scaled to [0, 1]
    and the original range is kept in ``metadata['u_range']``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvSchemaError(f"{path}: empty file") from None
        missing = [c for c in ("t", "u", "y") if c not in header]
        if missing:
            raise CsvSchemaError(f"{path}: missing column(s) {missing}; header must be t,u,y")
        idx = [header.index(c) for c in ("t", "u", "y")]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CsvSchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                values = [float(row[i]) for i in idx]
            except ValueError:
                raise CsvSchemaError(f"{path}:{lineno}: non-numeric value in {row}") from None
            if not all(math.isfinite(v) for v in values):
                raise CsvSchemaError(f"{path}:{lineno}: NaN or infinite value")
            rows.append(values)
    if not rows:
        raise CsvSchemaError(f"{path}: no data rows")
    data = np.array(rows)
    t, u, y = data.T
    if np.any(np.diff(t) <= 0):
        raise CsvSchemaError(f"{path}: t column is not strictly increasing")
    metadata = {"source": str(path), "normalized": normalize}
    if normalize:
        lo, hi = float(u.min()), float(u.max())
        u = (u - lo) / (hi - lo) if hi > lo else np.zeros_like(u)
        metadata["u_range"] = [lo, hi]
    if len(u) < 2:
        raise CsvSchemaError(f"{path}: need at least 2 rows")
    split = default_split(len(u)) if split is None else split
    return SeriesBundle(u, y, t, *split, metadata=metadata)
