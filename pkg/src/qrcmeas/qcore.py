"""Dense qubit linear algebra: gates, channels, partial trace.

Conventions used throughout the package:

* Tensor factor 0 is the most significant qubit, i.e. ``kron(a, b)`` puts
  ``a`` on the high bits of the basis index.
* Inside a 4-qubit reservoir block, qubits 0 and 1 are the system and
  qubits 2 and 3 are the ancillas, so ancillas are the least significant
  factor group.

States are plain ``numpy`` arrays; :func:`check_density_matrix` and
:func:`check_pure_state` validate them where it matters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

UNITARY_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-9

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)  # control = first (most significant) qubit


@dataclass(frozen=True)
class GateParams:
    """Angles (radians) of the tunable system-ancilla coupling gate."""

    theta: float = np.pi
    phi: float = 0.0
    lam: float = np.pi
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("theta", "phi", "lam", "gamma"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def cnot(cls) -> "GateParams":
        return cls(np.pi, 0.0, np.pi, 0.0)

    @classmethod
    def identity(cls) -> "GateParams":
        return cls(0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_strength(cls, strength: float) -> "GateParams":
        """Measurement strength on the 0..10 grid: theta = lam = strength*pi/10."""
        angle = float(strength) * np.pi / 10.0
        return cls(angle, 0.0, angle, 0.0)

    def to_dict(self) -> dict:
        return {"theta": self.theta, "phi": self.phi, "lam": self.lam, "gamma": self.gamma}


# --------------------------------------------------------------------------- #
# Validation                                                                  #
# --------------------------------------------------------------------------- #


def _n_qubits(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if dim < 1 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def check_matrix(a: np.ndarray, square: bool = True) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def check_density_matrix(rho: np.ndarray, psd: bool = False) -> np.ndarray:
    """Raise ``ValueError`` unless ``rho`` is a valid density matrix.

    The eigenvalue test is opt-in (``psd=True``); the simulation loops only
    check Hermiticity and trace.
    """
    rho = check_matrix(rho)
    _n_qubits(rho.shape[0])
    if np.max(np.abs(rho - rho.conj().T)) > TRACE_TOL:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.3g}, not 1")
    if psd and np.min(np.linalg.eigvalsh(rho)) < -PSD_TOL:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def check_pure_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.ndim != 1:
        raise ValueError(f"expected a state vector, got shape {psi.shape}")
    _n_qubits(psi.shape[0])
    if abs(np.vdot(psi, psi).real - 1.0) > TRACE_TOL:
        raise ValueError("state vector is not normalised")
    return psi


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


# --------------------------------------------------------------------------- #
# Tensor products and embeddings                                              #
# --------------------------------------------------------------------------- #


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; ``a`` occupies the most significant qubits."""
    return np.kron(check_matrix(a, square=False), check_matrix(b, square=False))


def kron_all(*ops: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ops)


def embed(op: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    """Lift a k-qubit operator onto ``qubits`` of an n-qubit register.

    ``qubits[0]`` receives the most significant factor of ``op``.
    """
    qubits = list(qubits)
    k = len(qubits)
    if len(set(qubits)) != k or any(q < 0 or q >= n_qubits for q in qubits):
        raise ValueError(f"invalid qubit indices {qubits} for {n_qubits} qubits")
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not act on {k} qubits")
    rest = [q for q in range(n_qubits) if q not in qubits]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=np.complex128))
    perm = list(np.argsort(qubits + rest))
    full = full.reshape([2] * (2 * n_qubits))
    full = full.transpose(perm + [p + n_qubits for p in perm])
    return full.reshape(2**n_qubits, 2**n_qubits)


# --------------------------------------------------------------------------- #
# Gates                                                                       #
# --------------------------------------------------------------------------- #


def rx(angle: float) -> np.ndarray:
    """exp(-i angle X / 2)."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def rz(angle: float) -> np.ndarray:
    """exp(-i angle Z / 2)."""
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)]).astype(np.complex128)


def cnot(control_index: int, target_index: int, n_qubits: int) -> np.ndarray:
    return embed(CX, [control_index, target_index], n_qubits)


def controlled_u(p: GateParams) -> np.ndarray:
    """The tunable 4x4 controlled-U gate in its printed basis |q1 q2>.

    The control is q2 (the second, least significant bit): the nontrivial
    block mixes |01> and |11>.
    """
    c, s = np.cos(p.theta / 2), np.sin(p.theta / 2)
    g, ph, lm = p.gamma, p.phi, p.lam
    u = np.eye(4, dtype=np.complex128)
    u[1, 1] = np.exp(1j * g) * c
    u[1, 3] = -np.exp(1j * (g + lm)) * s
    u[3, 1] = np.exp(1j * (g + ph)) * s
    u[3, 3] = np.exp(1j * (g + ph + lm)) * c
    return u


def coupling_gate(p: GateParams, control: int, target: int, n_qubits: int) -> np.ndarray:
    """Controlled-U with ``control`` driving a rotation of ``target``."""
    # printed ordering is |target control>
    return embed(controlled_u(p), [target, control], n_qubits)


def system_unitary(angle: float) -> np.ndarray:
    """Input-encoding 2-qubit unitary CX (RX(s) x RZ(s)) CX (RX(s) x I).

    Rightmost factor acts first. ``angle`` is the already scaled input.
    """
    first = np.kron(rx(angle), I2)
    middle = np.kron(rx(angle), rz(angle))
    return CX @ middle @ CX @ first


# --------------------------------------------------------------------------- #
# States and channels                                                         #
# --------------------------------------------------------------------------- #


def basis_density(index: int, n_qubits: int) -> np.ndarray:
    rho = np.zeros((2**n_qubits, 2**n_qubits), dtype=np.complex128)
    rho[index, index] = 1.0
    return rho


def pure_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    return np.outer(psi, psi.conj())


def partial_trace_ancilla(rho: np.ndarray, n_sys: int, n_anc: int) -> np.ndarray:
    """Trace out the ``n_anc`` least significant qubits."""
    rho = np.asarray(rho)
    ds, da = 2**n_sys, 2**n_anc
    if rho.shape != (ds * da, ds * da):
        raise ValueError(
            f"density matrix shape {rho.shape} does not match {n_sys}+{n_anc} qubits"
        )
    return np.trace(rho.reshape(ds, da, ds, da), axis1=1, axis2=3)


def apply_unitary(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


def apply_kraus(rho: np.ndarray, kraus: Iterable[np.ndarray]) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in kraus)


def amplitude_damping_kraus(p: float) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"damping probability must lie in [0, 1], got {p}")
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - p)]], dtype=np.complex128)
    k1 = np.array([[0.0, np.sqrt(p)], [0.0, 0.0]], dtype=np.complex128)
    return k0, k1


def amplitude_damping_channel(rho: np.ndarray, qubit: int, p: float) -> np.ndarray:
    """Apply amplitude damping with decay probability ``p`` to one qubit."""
    k0, k1 = amplitude_damping_kraus(p)
    n = _n_qubits(np.asarray(rho).shape[0])
    if p == 0.0:
        return np.array(rho, dtype=np.complex128)
    return apply_kraus(rho, (embed(k0, [qubit], n), embed(k1, [qubit], n)))


def measure_reset_ancilla(rho: np.ndarray, n_sys: int, n_anc: int) -> np.ndarray:
    """Average over computational-basis ancilla outcomes, then reset to |0..0>.

    Equals ``partial_trace_ancilla`` followed by re-attaching |0..0><0..0|.
    """
    reduced = partial_trace_ancilla(rho, n_sys, n_anc)
    return np.kron(reduced, basis_density(0, n_anc))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    eig = np.linalg.eigvalsh(np.asarray(rho) - np.asarray(sigma))
    return 0.5 * float(np.sum(np.abs(eig)))


def expectation(rho: np.ndarray, op: np.ndarray) -> float:
    return float(np.real(np.trace(op @ rho)))


# --------------------------------------------------------------------------- #
# QND check                                                                   #
# --------------------------------------------------------------------------- #

Z_MASKS = ((1, 0), (0, 1), (1, 1))


def qnd_commutator_check(
    inputs: Sequence[float],
    steps: Sequence[tuple[int, int]] | None = None,
    masks: Sequence[tuple[int, int]] = Z_MASKS,
    input_scale: float = np.pi,
    coupling: GateParams | None = None,
) -> float:
    """Largest |entry| of [Z_a(j), Z_a(k)] over the requested step pairs.

    Two system qubits are coupled, at each measurement step j, to their own
    pair of ancillas prepared in |00>. A fresh register per step is the
    dilation of "reset the ancillas, then reuse them". The Heisenberg
    observable is Z_a(j) = T_j^dag O_j T_j, where T_j is the ordered product
    of coupling * U(u_i) for i <= j and O_j is a product of Z/I on ancilla
    register j chosen by a mask.

    ``steps`` are 1-based (j, k) pairs; defaults to all pairs up to
    ``len(inputs)``. At most 4 steps (10 qubits) are supported.
    """
    n_steps = len(inputs)
    if steps is None:
        steps = list(itertools.product(range(1, n_steps + 1), repeat=2))
    steps = list(steps)
    last = max(max(j, k) for j, k in steps) if steps else 0
    if last > 4 or last > n_steps:
        raise ValueError("qnd_commutator_check supports at most 4 steps within inputs")
    coupling = GateParams.cnot() if coupling is None else coupling
    n = 2 + 2 * last
    dim = 2**n
    frames = []
    total = np.eye(dim, dtype=np.complex128)
    for j in range(last):
        u_sys = embed(system_unitary(input_scale * inputs[j]), [0, 1], n)
        a0, a1 = 2 + 2 * j, 3 + 2 * j
        couple = coupling_gate(coupling, 1, a1, n) @ coupling_gate(coupling, 0, a0, n)
        total = couple @ u_sys @ total
        frames.append(total)

    cache: dict[tuple[int, tuple[int, int]], np.ndarray] = {}

    def heisenberg(j: int, mask: tuple[int, int]) -> np.ndarray:
        key = (j, tuple(mask))
        if key not in cache:
            ops = [Z if bit else I2 for bit in mask]
            obs = embed(np.kron(ops[0], ops[1]), [2 + 2 * (j - 1), 3 + 2 * (j - 1)], n)
            t = frames[j - 1]
            cache[key] = t.conj().T @ obs @ t
        return cache[key]

    worst = 0.0
    for j, k in steps:
        for ma in masks:
            for mb in masks:
                a, b = heisenberg(j, ma), heisenberg(k, mb)
                worst = max(worst, float(np.max(np.abs(a @ b - b @ a))))
    return worst
