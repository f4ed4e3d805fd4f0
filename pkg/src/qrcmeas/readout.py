"""Linear readout and the two error metrics (squared error and DTW)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .reservoir import FeatureMatrix

RCOND = 1e-10


@dataclass
class ReadoutModel:
    weights: np.ndarray
    train_range: tuple[int, int] | None = None
    rcond: float = RCOND
    ridge: float = 0.0
    rank: int = 0


@dataclass
class MetricReport:
    nmse: float
    dtw: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"nmse_paper": self.nmse, "dtw": self.dtw, **self.extra}


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        return X.values
    return np.atleast_2d(np.asarray(X, dtype=float))


def fit(
    X,
    y,
    rcond: float = RCOND,
    ridge: float = 0.0,
    train_range: tuple[int, int] | None = None,
) -> ReadoutModel:
    """Least-squares readout weights via a truncated SVD pseudo-inverse.

    Singular values below ``rcond * s_max`` are dropped, which gives the
    minimum-norm solution for rank-deficient designs. ``ridge > 0`` adds
    Tikhonov shrinkage s / (s^2 + ridge) on the kept directions.
    """
    A = _as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    if A.shape[0] != y.shape[0]:
        raise ValueError(f"X has {A.shape[0]} rows but y has {y.shape[0]} entries")
    if not np.any(A):
        raise ValueError("design matrix is all zeros")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    keep = s > rcond * s[0]
    inv = np.zeros_like(s)
    inv[keep] = s[keep] / (s[keep] ** 2 + ridge)
    w = vt.T @ (inv * (u.T @ y))
    return ReadoutModel(w, train_range, rcond, ridge, int(np.sum(keep)))


def predict(model: ReadoutModel, X) -> np.ndarray:
    A = _as_matrix(X)
    if A.shape[1] != model.weights.shape[0]:
        raise ValueError("feature width does not match the model")
    return A @ model.weights


def nmse_paper(y, y_hat) -> float:
    """Mean squared error (1/M) sum (y - y_hat)^2, with no variance scaling."""
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empty sequence")
    if y.shape != y_hat.shape:
        raise ValueError("sequences must have equal length")
    return float(np.mean((y - y_hat) ** 2))


def dtw(s, t) -> float:
    """Dynamic time warping distance with |s_i - t_j| local cost.

    f(i, j) = |s_i - t_j| + min(f(i, j-1), f(i-1, j), f(i-1, j-1)), with
    f(0, 0) = 0 and infinite borders; the result is f(M, N).
    """
    s = np.ascontiguousarray(s, dtype=float).ravel()
    t = np.ascontiguousarray(t, dtype=float).ravel()
    if s.size == 0 or t.size == 0:
        raise ValueError("empty sequence")
    return float(kernels.dtw_distance(s, t))


def evaluate(y, y_hat) -> MetricReport:
    return MetricReport(nmse_paper(y, y_hat), dtw(y, y_hat))
