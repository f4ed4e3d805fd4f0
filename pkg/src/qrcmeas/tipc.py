"""Temporal information processing capacity (TIPC).

Pipeline, as run by :func:`compute_tipc`:

1. centre the state matrix and orthonormalise it with a compact SVD,
2. evaluate polynomial basis functions of the input history (and, if
   asked, of the lagged normalised states) on the usable time window,
3. Gram-Schmidt the basis columns in order, after the constant vector,
4. capacity of each orthonormal basis xi: ``C = ||P^T xi||^2``, which is
   also ``1 - min_w ||xi - X w||^2 / ||xi||^2``,
5. zero every capacity below ``chi2_{1-p}(r) / T`` and count the surviving
   input-only terms ("richness").
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

RANK_RCOND = 1e-10
CLIP_TOL = 1e-12

TIME_INVARIANT = "time-invariant"
TIME_VARIANT = "time-variant"


@dataclass(frozen=True)
class BasisTerm:
    """Monomial in delayed inputs and lagged normalised states.

    ``inputs`` holds (delay, exponent) pairs for u[t - delay]; ``states``
    holds (component, lag, exponent) triples for xhat_k[t - lag].
    """

    inputs: tuple[tuple[int, int], ...] = ()
    states: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self):
        if self.input_order + self.state_order < 1:
            raise ValueError("basis term must have total order >= 1")

    @property
    def input_order(self) -> int:
        return sum(e for _, e in self.inputs)

    @property
    def state_order(self) -> int:
        return sum(e for _, _, e in self.states)

    @property
    def time_invariant(self) -> bool:
        return self.state_order == 0

    @property
    def label(self) -> str:
        parts = []
        for d, e in self.inputs:
            base = "u[t]" if d == 0 else f"u[t-{d}]"
            parts.append(base if e == 1 else f"{base}^{e}")
        for k, lag, e in self.states:
            base = f"x{k + 1}[t-{lag}]"
            parts.append(base if e == 1 else f"{base}^{e}")
        return "*".join(parts)

    def evaluate(self, u: np.ndarray, P: np.ndarray | None, rows: np.ndarray) -> np.ndarray:
        col = np.ones(len(rows))
        for d, e in self.inputs:
            col = col * u[rows - d] ** e
        for k, lag, e in self.states:
            col = col * P[rows - lag, k] ** e
        return col


@dataclass
class Bases:
    terms: list[BasisTerm]
    columns: np.ndarray  # (window length, n_terms)
    start: int
    stop: int


@dataclass
class CapacityReport:
    terms: list[BasisTerm]
    capacities: np.ndarray
    rank: int
    length: int
    raw: np.ndarray | None = None
    regression: np.ndarray | None = None
    threshold: float = 0.0
    p: float | None = None
    correction: str = "none"
    classes: list[str] = field(default_factory=list)
    richness: int = 0
    config: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(np.sum(self.capacities))

    def _mask(self, invariant: bool) -> np.ndarray:
        return np.array([t.time_invariant == invariant for t in self.terms], dtype=bool)

    @property
    def time_invariant_total(self) -> float:
        return float(np.sum(self.capacities[self._mask(True)]))

    @property
    def time_variant_total(self) -> float:
        return float(np.sum(self.capacities[self._mask(False)]))

    @property
    def form_discrepancy(self) -> float:
        """Largest gap between the projection and the regression formulas."""
        if self.regression is None or self.raw is None:
            return 0.0
        return float(np.max(np.abs(self.raw - self.regression), initial=0.0))

    def by_input_degree(self, invariant_only: bool = True) -> dict[int, float]:
        out: dict[int, float] = {}
        for term, c in zip(self.terms, self.capacities):
            if invariant_only and not term.time_invariant:
                continue
            out[term.input_order] = out.get(term.input_order, 0.0) + float(c)
        return dict(sorted(out.items()))

    def surviving(self, invariant_only: bool = True) -> list[tuple[BasisTerm, float]]:
        return [
            (t, float(c))
            for t, c in zip(self.terms, self.capacities)
            if c > 0 and (t.time_invariant or not invariant_only)
        ]

    def to_dict(self) -> dict:
        entries = []
        for i, (term, c) in enumerate(zip(self.terms, self.capacities)):
            if c <= 0:
                continue
            entries.append(
                {
                    "term": term.label,
                    "input_order": term.input_order,
                    "state_order": term.state_order,
                    "capacity": float(c),
                    "class": self.classes[i] if self.classes else None,
                }
            )
        return {
            "entries": entries,
            "n_terms": len(self.terms),
            "total": self.total,
            "time_invariant_total": self.time_invariant_total,
            "time_variant_total": self.time_variant_total,
            "by_input_degree": {str(k): v for k, v in self.by_input_degree().items()},
            "richness": self.richness,
            "rank": self.rank,
            "length": self.length,
            "threshold": self.threshold,
            "p": self.p,
            "correction": self.correction,
            "form_discrepancy": self.form_discrepancy,
            "config": self.config,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


# --------------------------------------------------------------------------- #
# Steps                                                                       #
# --------------------------------------------------------------------------- #


def normalize_states(
    X: np.ndarray, rcond: float = RANK_RCOND, scale: float | None = None
) -> tuple[np.ndarray, int]:
    """Left singular vectors of ``X`` for the numerically nonzero singular values.

    Singular values at or below ``rcond * scale`` are dropped; ``scale``
    defaults to the largest singular value. Pass the norm of the uncentred
    states so that a constant reservoir (centred to rounding noise) gets
    rank 0 instead of a rank made of noise.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("state matrix must be 2-d with at least 2 rows")
    u, s, _ = np.linalg.svd(X, full_matrices=False)
    ref = (s[0] if s.size else 0.0) if scale is None else scale
    r = int(np.sum(s > rcond * ref))
    return u[:, :r], r


def input_terms(max_degree: int, max_delay: int) -> list[BasisTerm]:
    """All input monomials of degree 1..max_degree over delays 0..max_delay-1.

    Ordered by degree, then by delay profile (u[t] before u[t-1]).
    """
    if max_degree < 1 or max_delay < 1:
        raise ValueError("max_degree and max_delay must be >= 1")
    terms = []
    for degree in range(1, max_degree + 1):
        for delays in itertools.combinations_with_replacement(range(max_delay), degree):
            counts: dict[int, int] = {}
            for d in delays:
                counts[d] = counts.get(d, 0) + 1
            terms.append(BasisTerm(inputs=tuple(sorted(counts.items()))))
    return terms


def state_terms(rank: int, max_delay: int, mix_degree: int) -> list[BasisTerm]:
    """x_k[t-1] alone and times input monomials up to ``mix_degree``."""
    terms = []
    mixers: list[tuple[tuple[int, int], ...]] = [()]
    if mix_degree >= 1:
        mixers += [t.inputs for t in input_terms(mix_degree, max_delay)]
    for inputs in mixers:
        for k in range(rank):
            terms.append(BasisTerm(inputs=inputs, states=((k, 1, 1),)))
    return terms


def build_bases(
    u,
    P: np.ndarray | None = None,
    max_degree: int = 4,
    max_delay: int = 10,
    state_mix: bool = False,
    mix_degree: int = 1,
) -> Bases:
    """Evaluate the ordered basis on every timestep with full history.

    Input-only terms come first. With ``state_mix`` the lag-1 normalised
    state components ``P[t-1, k]`` are appended, alone and multiplied by
    input monomials of degree <= ``mix_degree``.
    """
    u = np.asarray(u, dtype=float).ravel()
    terms = input_terms(max_degree, max_delay)
    if state_mix:
        if P is None:
            raise ValueError("state_mix needs the normalised states P")
        if P.shape[0] != u.shape[0]:
            raise ValueError("P and u must cover the same timesteps")
        terms += state_terms(P.shape[1], max_delay, mix_degree)
    start = max(max_delay - 1, 1 if state_mix else 0)
    stop = u.shape[0]
    if stop - start <= len(terms) + 1:
        raise ValueError(
            f"window of {stop - start} steps is too short for {len(terms)} basis terms"
        )
    rows = np.arange(start, stop)
    columns = np.column_stack([t.evaluate(u, P, rows) for t in terms])
    return Bases(terms, columns, start, stop)


def orthonormalize(Z: np.ndarray, with_constant: bool = True, tol: float = 1e-10) -> np.ndarray:
    """Classical Gram-Schmidt with one re-orthogonalisation pass.

    Columns are processed left to right; with ``with_constant`` they are
    first made orthogonal to the all-ones vector, which is then dropped.
    """
    Z = np.asarray(Z, dtype=float)
    T, n = Z.shape
    offset = 1 if with_constant else 0
    Q = np.empty((T, n + offset))
    if with_constant:
        Q[:, 0] = 1.0 / np.sqrt(T)
    for i in range(n):
        v = Z[:, i].copy()
        ref = np.linalg.norm(v)
        basis = Q[:, : offset + i]
        for _ in range(2):
            v -= basis @ (basis.T @ v)
        norm = np.linalg.norm(v)
        if ref == 0.0 or norm <= tol * ref:
            raise ValueError(f"basis column {i} has zero norm after orthogonalisation")
        Q[:, offset + i] = v / norm
    return Q[:, offset:]


def compute_capacities(
    P: np.ndarray,
    bases: Bases | list[BasisTerm],
    xi: np.ndarray,
    states: np.ndarray | None = None,
) -> CapacityReport:
    """Capacity of each orthonormal basis column, before truncation.

    The projection form ``||P^T xi||^2`` is what the report carries. If
    ``states`` (the window's centred state matrix) is given, the regression
    form is evaluated by least squares on it as a cross-check.
    """
    terms = bases.terms if isinstance(bases, Bases) else list(bases)
    norms = np.linalg.norm(xi, axis=0)
    if np.any(norms == 0):
        raise ValueError("zero-norm basis column")
    gamma = P.T @ xi
    cap = np.sum(gamma**2, axis=0) / norms**2
    regression = None
    if states is not None:
        w, *_ = np.linalg.lstsq(states, xi, rcond=RANK_RCOND)
        resid = np.sum((xi - states @ w) ** 2, axis=0)
        regression = 1.0 - resid / norms**2
    for arr in (cap, regression):
        if arr is not None and (arr.min() < -CLIP_TOL or arr.max() > 1 + CLIP_TOL):
            raise FloatingPointError("capacity outside [0, 1] beyond tolerance")
    cap = np.clip(cap, 0.0, 1.0)
    return CapacityReport(
        terms=terms,
        capacities=cap.copy(),
        rank=P.shape[1],
        length=P.shape[0],
        raw=cap,
        regression=None if regression is None else np.clip(regression, 0.0, 1.0),
    )


def capacity_threshold(length: int, rank: int, p: float = 0.05, n_tests: int = 1) -> float:
    """Upper ``p`` point of chi2(rank) / length, ``p`` split over ``n_tests``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"significance level must lie in (0, 1), got {p}")
    if rank == 0:
        return 0.0  # no state directions, every capacity is already zero
    return float(stats.chi2.ppf(1.0 - p / n_tests, rank) / length)


def threshold_and_truncate(
    report: CapacityReport,
    p: float = 0.05,
    correction: str = "none",
) -> CapacityReport:
    """Zero every capacity below the chi-squared significance threshold.

    ``correction="bonferroni"`` divides ``p`` by the number of basis terms,
    bounding the chance of any null term surviving by ``p``.
    """
    if correction not in ("none", "bonferroni"):
        raise ValueError(f"unknown correction {correction!r}")
    n_tests = len(report.terms) if correction == "bonferroni" else 1
    c_th = capacity_threshold(report.length, report.rank, p, n_tests)
    raw = report.raw if report.raw is not None else report.capacities
    kept = np.where(raw >= c_th, raw, 0.0)
    return replace(report, capacities=kept, threshold=c_th, p=p, correction=correction)


def classify_and_richness(report: CapacityReport) -> CapacityReport:
    classes = [TIME_INVARIANT if t.time_invariant else TIME_VARIANT for t in report.terms]
    richness = sum(
        1 for t, c in zip(report.terms, report.capacities) if t.time_invariant and c > 0
    )
    return replace(report, classes=classes, richness=richness)


def compute_tipc(
    states: np.ndarray,
    u,
    max_degree: int = 4,
    max_delay: int = 10,
    state_mix: bool = True,
    mix_degree: int = 1,
    p: float = 0.05,
    correction: str = "none",
) -> CapacityReport:
    """Full TIPC analysis of a (T, N) state matrix driven by input ``u``.

    The state matrix should exclude any bias column and any washout.
    """
    states = np.asarray(states, dtype=float)
    u = np.asarray(u, dtype=float).ravel()
    if states.shape[0] != u.shape[0]:
        raise ValueError("states and input must have the same length")
    scale = float(np.linalg.norm(states, 2))
    centred = states - states.mean(axis=0)
    P_full, _ = normalize_states(centred, scale=scale)
    bases = build_bases(u, P_full, max_degree, max_delay, state_mix, mix_degree)
    window = states[bases.start : bases.stop]
    window = window - window.mean(axis=0)
    P, _ = normalize_states(window, scale=scale)
    xi = orthonormalize(bases.columns)
    report = compute_capacities(P, bases, xi, states=window)
    report = threshold_and_truncate(report, p, correction)
    report = classify_and_richness(report)
    report.config = {
        "max_degree": max_degree,
        "max_delay": max_delay,
        "state_mix": state_mix,
        "mix_degree": mix_degree,
    }
    return report
