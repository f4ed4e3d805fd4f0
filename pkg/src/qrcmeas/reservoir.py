"""Reservoir built from independent 4-qubit blocks with repeated ancilla readout.

Each block holds two system qubits (0, 1) and two ancillas (2, 3). At every
timestep the system is damped, the ancillas are prepared in |00>, the
block unitary

    Ubar(u) = (C_{1->3} x C_{0->2}) . CX (RX(s) x RZ(s)) CX (RX(s) x I),  s = a*u

is applied, and the ancillas are measured in the computational basis. The
feature vector is the pair of ancilla <Z> values per block.

Three evolution modes are provided:

``ensemble``
    exact evolution of the outcome-averaged system state (infinite shots);
``trajectory``
    per-shot pure-state sampling with collapse, ``shots`` samples per step;
``baseline``
    no ancillas and no mid-circuit readout; the system <Z> values are read
    from a freshly prepared circuit of depth t for every t.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import kernels
from .qcore import (
    GateParams,
    amplitude_damping_kraus,
    basis_density,
    check_density_matrix,
    coupling_gate,
    partial_trace_ancilla,
    system_unitary,
)

MODES = ("ensemble", "trajectory", "baseline")
ANCILLA_ZERO_COLUMNS = np.array([0, 4, 8, 12])  # |sys>|00> inside a block
_Z_SIGNS = np.array([[1, 1, -1, -1], [1, -1, 1, -1]], dtype=float)  # per ancilla outcome


@dataclass(frozen=True)
class ReservoirConfig:
    """Reservoir hyper-parameters.

    ``damping`` is a (low, high) range of per-step amplitude-damping
    probabilities on the system qubits, spread linearly across blocks. It
    stands in for device relaxation: without a non-unital channel the
    averaged dynamics converges to the maximally mixed state for every
    input and the features carry no information. ``baseline_damping`` is
    the single damping probability used by the ``baseline`` mode.
    """

    n_blocks: int = 6
    input_scale: float = np.pi
    coupling: GateParams = field(default_factory=GateParams.cnot)
    shots: int = 8192
    seed: int = 0
    mode: str = "ensemble"
    damping: tuple[float, float] = (0.2, 0.7)
    baseline_damping: float = 0.0

    def __post_init__(self):
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not np.isfinite(self.input_scale):
            raise ValueError("input_scale must be finite")
        lo, hi = (float(v) for v in self.damping)
        object.__setattr__(self, "damping", (lo, hi))
        for p in (lo, hi, self.baseline_damping):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"damping probabilities must lie in [0, 1], got {p}")
        if isinstance(self.coupling, dict):
            object.__setattr__(self, "coupling", GateParams(**self.coupling))

    def block_damping(self) -> np.ndarray:
        lo, hi = self.damping
        if self.n_blocks == 1:
            return np.array([lo])
        return np.linspace(lo, hi, self.n_blocks)

    def replace(self, **changes) -> "ReservoirConfig":
        return dataclasses.replace(self, **changes)

    def with_strength(self, strength: float) -> "ReservoirConfig":
        return self.replace(coupling=GateParams.from_strength(strength))

    def to_dict(self) -> dict:
        return {
            "n_blocks": self.n_blocks,
            "input_scale": self.input_scale,
            "coupling": self.coupling.to_dict(),
            "shots": self.shots,
            "seed": self.seed,
            "mode": self.mode,
            "damping": list(self.damping),
            "baseline_damping": self.baseline_damping,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReservoirConfig":
        data = dict(data)
        if "coupling" in data and isinstance(data["coupling"], dict):
            data["coupling"] = GateParams(**data["coupling"])
        if "strength" in data:
            data["coupling"] = GateParams.from_strength(data.pop("strength"))
        if "damping" in data:
            d = data["damping"]
            data["damping"] = (float(d), float(d)) if np.isscalar(d) else tuple(d)
        return cls(**data)


@dataclass
class FeatureMatrix:
    """Design matrix: ``n_blocks * 2`` <Z> columns followed by an all-ones bias."""

    values: np.ndarray
    timesteps: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.timesteps = np.asarray(self.timesteps, dtype=int)
        if self.values.shape[0] != self.timesteps.shape[0]:
            raise ValueError("row count and timestep tags differ")

    @classmethod
    def from_states(cls, states: np.ndarray, timesteps=None) -> "FeatureMatrix":
        states = np.asarray(states, dtype=float)
        if timesteps is None:
            timesteps = np.arange(states.shape[0])
        return cls(np.hstack([states, np.ones((states.shape[0], 1))]), timesteps)

    @property
    def states(self) -> np.ndarray:
        return self.values[:, :-1]

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def rows(self, start: int, stop: int) -> "FeatureMatrix":
        mask = (self.timesteps >= start) & (self.timesteps < stop)
        return FeatureMatrix(self.values[mask], self.timesteps[mask])

    def column_names(self) -> list[str]:
        n_blocks = self.states.shape[1] // 2
        names = [f"z_b{b}_a{i}" for b in range(n_blocks) for i in (0, 1)]
        return names + ["bias"]


@dataclass
class ShotTable:
    """Sampled ancilla outcomes.

    ``outcomes[t, shot, block]`` is the 2-bit integer 2*m_0 + m_1 of that
    block's ancillas.
    """

    outcomes: np.ndarray

    def bits(self) -> np.ndarray:
        """Bit-strings, shape (T, shots, 2 * n_blocks)."""
        o = self.outcomes
        out = np.empty(o.shape[:2] + (2 * o.shape[2],), dtype=np.uint8)
        out[..., 0::2] = o >> 1
        out[..., 1::2] = o & 1
        return out

    def means(self) -> np.ndarray:
        """Empirical <Z> per ancilla: frequency of 0 minus frequency of 1."""
        return np.mean(1.0 - 2.0 * self.bits(), axis=1)


# --------------------------------------------------------------------------- #
# Circuit                                                                     #
# --------------------------------------------------------------------------- #


@lru_cache(maxsize=64)
def _coupling_layer(p: GateParams) -> np.ndarray:
    return coupling_gate(p, 1, 3, 4) @ coupling_gate(p, 0, 2, 4)


def build_block_unitary(u_t: float, cfg: ReservoirConfig) -> np.ndarray:
    """16x16 block unitary for one input value."""
    if not np.isfinite(u_t):
        raise ValueError("input must be finite")
    u_sys = system_unitary(cfg.input_scale * float(u_t))
    return _coupling_layer(cfg.coupling) @ np.kron(u_sys, np.eye(4))


@lru_cache(maxsize=64)
def _system_kraus(p: float) -> tuple[np.ndarray, ...]:
    k = amplitude_damping_kraus(p)
    return tuple(np.kron(a, b) for a in k for b in k)


def damp_system(rho: np.ndarray, p: float) -> np.ndarray:
    """Amplitude damping with probability ``p`` on both system qubits."""
    if p == 0.0:
        return rho
    return sum(k @ rho @ k.conj().T for k in _system_kraus(float(p)))


def initial_system_state() -> np.ndarray:
    return basis_density(0, 2)


# --------------------------------------------------------------------------- #
# Ensemble mode                                                               #
# --------------------------------------------------------------------------- #


def _ancilla_z(joint: np.ndarray) -> np.ndarray:
    probs = np.real(np.diagonal(joint)).reshape(4, 4).sum(axis=0)
    return _Z_SIGNS @ probs


def step_ensemble(
    rho: np.ndarray,
    u_t: float,
    cfg: ReservoirConfig,
    damping: float = 0.0,
    unitary: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One averaged step: damp, attach |00>, apply the block, read, trace out.

    Tracing out the ancillas equals averaging over measurement outcomes and
    resetting, because the next step re-attaches a fresh |00>.
    """
    u = build_block_unitary(u_t, cfg) if unitary is None else unitary
    rho = damp_system(rho, damping)
    w = u[:, ANCILLA_ZERO_COLUMNS]
    joint = w @ rho @ w.conj().T
    return partial_trace_ancilla(joint, 2, 2), _ancilla_z(joint)


def evolve_ensemble(
    inputs: Sequence[float],
    cfg: ReservoirConfig,
    initial_state: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Run all blocks in ensemble mode.

    Returns:
        z: (T, n_blocks, 2) ancilla expectations.
        states: (n_blocks, T + 1, 4, 4) system states, ``states[:, 0]`` initial.
    """
    inputs = _check_inputs(inputs)
    rho0 = initial_system_state() if initial_state is None else initial_state
    check_density_matrix(rho0)
    unitaries = [build_block_unitary(u, cfg) for u in inputs]
    rates = cfg.block_damping()
    T = len(inputs)
    z = np.empty((T, cfg.n_blocks, 2))
    states = np.empty((cfg.n_blocks, T + 1, 4, 4), dtype=np.complex128)
    for b, rate in enumerate(rates):
        rho = np.array(rho0, dtype=np.complex128)
        states[b, 0] = rho
        for t, u in enumerate(inputs):
            rho, z[t, b] = step_ensemble(rho, u, cfg, rate, unitaries[t])
            states[b, t + 1] = rho
    return z, states


# --------------------------------------------------------------------------- #
# Trajectory mode                                                             #
# --------------------------------------------------------------------------- #


def block_generators(seed: int, n_blocks: int) -> list[np.random.Generator]:
    """Independent counter-based streams, one per block."""
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def step_trajectory(
    psi: np.ndarray,
    u_t: float,
    cfg: ReservoirConfig,
    rng: np.random.Generator,
    damping: float = 0.0,
    unitary: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance every shot by one step.

    Args:
        psi: (shots, 4) conditional system states.

    Returns:
        New (shots, 4) states and the (shots,) sampled outcomes 2*m_0 + m_1.
    """
    u = build_block_unitary(u_t, cfg) if unitary is None else unitary
    cols = np.ascontiguousarray(u[:, ANCILLA_ZERO_COLUMNS])
    draws = rng.random((psi.shape[0], 3))
    return kernels.trajectory_step(
        np.ascontiguousarray(psi, dtype=np.complex128),
        cols,
        float(damping),
        np.ascontiguousarray(draws[:, :2]),
        np.ascontiguousarray(draws[:, 2]),
    )


def sample_trajectories(
    inputs: Sequence[float],
    cfg: ReservoirConfig,
    initial_state: np.ndarray | None = None,
) -> ShotTable:
    inputs = _check_inputs(inputs)
    psi0 = np.zeros(4, dtype=np.complex128)
    psi0[0] = 1.0
    if initial_state is not None:
        psi0 = np.asarray(initial_state, dtype=np.complex128)
        if psi0.shape != (4,):
            raise ValueError("trajectory initial state must be a 4-vector")
        psi0 = psi0 / np.linalg.norm(psi0)
    unitaries = [build_block_unitary(u, cfg) for u in inputs]
    outcomes = np.empty((len(inputs), cfg.shots, cfg.n_blocks), dtype=np.uint8)
    gens = block_generators(cfg.seed, cfg.n_blocks)
    for b, (rate, rng) in enumerate(zip(cfg.block_damping(), gens)):
        psi = np.tile(psi0, (cfg.shots, 1))
        for t, u in enumerate(inputs):
            psi, outcomes[t, :, b] = step_trajectory(psi, u, cfg, rng, rate, unitaries[t])
    return ShotTable(outcomes)


# --------------------------------------------------------------------------- #
# Baseline mode                                                               #
# --------------------------------------------------------------------------- #


def _system_z(rho: np.ndarray) -> np.ndarray:
    return _Z_SIGNS @ np.real(np.diagonal(rho))


def run_baseline(
    inputs: Sequence[float],
    cfg: ReservoirConfig,
    initial_state: np.ndarray | None = None,
) -> FeatureMatrix:
    """System <Z> after a freshly prepared depth-t circuit, for every t.

    Each step applies damping (``cfg.baseline_damping``) and then U(u_t).
    Without intermediate measurements the depth-t circuit's final state is
    the t-th state of one sequential pass, so that pass is what we compute.
    """
    inputs = _check_inputs(inputs)
    rho = initial_system_state() if initial_state is None else np.asarray(initial_state)
    p = cfg.baseline_damping
    z = np.empty((len(inputs), 2))
    for t, u in enumerate(inputs):
        v = system_unitary(cfg.input_scale * u)
        rho = v @ damp_system(rho, p) @ v.conj().T
        z[t] = _system_z(rho)
    # blocks share input, circuit and noise, so they coincide exactly
    return FeatureMatrix.from_states(np.tile(z, (1, cfg.n_blocks)))


# --------------------------------------------------------------------------- #
# Entry point                                                                 #
# --------------------------------------------------------------------------- #


def _check_inputs(inputs) -> np.ndarray:
    arr = np.asarray(inputs, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError("inputs must be finite")
    return arr


def run(
    inputs: Sequence[float],
    cfg: ReservoirConfig,
    initial_state: np.ndarray | None = None,
) -> tuple[FeatureMatrix, ShotTable | None]:
    """Drive the reservoir with ``inputs`` in ``cfg.mode``.

    Returns the feature matrix (one row per input, bias column last) and,
    in trajectory mode, the shot table it was averaged from.
    """
    if cfg.mode == "baseline":
        return run_baseline(inputs, cfg, initial_state), None
    if cfg.mode == "trajectory":
        shots = sample_trajectories(inputs, cfg, initial_state)
        return FeatureMatrix.from_states(shots.means()), shots
    z, _ = evolve_ensemble(inputs, cfg, initial_state)
    return FeatureMatrix.from_states(z.reshape(z.shape[0], -1)), None
