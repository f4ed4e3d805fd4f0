"""Hot inner loops, each with a numba and a pure-numpy implementation.

The dispatchers at the bottom pick one according to
:data:`qrcmeas._accel.USE_NUMBA`. The two paths consume the same
pre-drawn uniforms, so for a given seed they produce the same shot table.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

# Trajectory step
# ---------------
# psi      (S, 4)  complex  conditional system state per shot, basis |q0 q1>
# cols     (16, 4) complex  block unitary restricted to ancilla-|00> inputs
# rate     float            amplitude-damping probability per system qubit
# u_damp   (S, 2)  float    uniforms for the two damping jump decisions
# u_meas   (S,)    float    uniforms for the ancilla outcome draw
#
# Per shot: damp (quantum-jump unravelling), couple to fresh ancillas,
# sample the 2-bit ancilla outcome m, collapse. Outcome m = 2*b_a0 + b_a1.

_TINY = 1e-300


@njit
def _trajectory_step_numba(psi, cols, rate, u_damp, u_meas):
    n_shots = psi.shape[0]
    out = np.empty_like(psi)
    outcomes = np.empty(n_shots, dtype=np.uint8)
    keep = np.sqrt(1.0 - rate)
    amp = np.empty(4, dtype=np.complex128)
    phi = np.empty(16, dtype=np.complex128)
    probs = np.empty(4)
    for s in range(n_shots):
        for i in range(4):
            amp[i] = psi[s, i]
        if rate > 0.0:
            for q in range(2):
                mask = 2 if q == 0 else 1
                p_excited = 0.0
                for i in range(4):
                    if i & mask:
                        p_excited += amp[i].real ** 2 + amp[i].imag ** 2
                if u_damp[s, q] < rate * p_excited:
                    for i in range(4):
                        if not (i & mask):
                            amp[i] = amp[i | mask]
                    for i in range(4):
                        if i & mask:
                            amp[i] = 0.0
                else:
                    for i in range(4):
                        if i & mask:
                            amp[i] = amp[i] * keep
                norm = 0.0
                for i in range(4):
                    norm += amp[i].real ** 2 + amp[i].imag ** 2
                norm = np.sqrt(norm)
                for i in range(4):
                    amp[i] = amp[i] / norm
        for r in range(16):
            acc = 0.0 + 0.0j
            for c in range(4):
                acc += cols[r, c] * amp[c]
            phi[r] = acc
        total = 0.0
        for m in range(4):
            pm = 0.0
            for k in range(4):
                v = phi[4 * k + m]
                pm += v.real ** 2 + v.imag ** 2
            probs[m] = pm
            total += pm
        target = u_meas[s] * total
        cum = 0.0
        chosen = 3
        for m in range(4):
            cum += probs[m]
            if target < cum:
                chosen = m
                break
        pm = probs[chosen]
        if pm <= _TINY:
            raise FloatingPointError("zero-probability outcome selected")
        scale = 1.0 / np.sqrt(pm)
        for k in range(4):
            out[s, k] = phi[4 * k + chosen] * scale
        outcomes[s] = chosen
    return out, outcomes


def _damp_numpy(amp, rate, u_damp):
    keep = np.sqrt(1.0 - rate)
    for q, mask in enumerate((2, 1)):
        hi = [i for i in range(4) if i & mask]
        lo = [i ^ mask for i in hi]
        p_excited = np.sum(np.abs(amp[:, hi]) ** 2, axis=1)
        jump = u_damp[:, q] < rate * p_excited
        new = amp.copy()
        new[:, hi] *= keep
        jumped = np.zeros_like(amp)
        jumped[:, lo] = amp[:, hi]
        new[jump] = jumped[jump]
        amp = new / np.linalg.norm(new, axis=1, keepdims=True)
    return amp


def _trajectory_step_numpy(psi, cols, rate, u_damp, u_meas):
    amp = np.asarray(psi, dtype=np.complex128)
    if rate > 0.0:
        amp = _damp_numpy(amp, rate, u_damp)
    phi = (amp @ cols.T).reshape(-1, 4, 4)  # (shot, system, ancilla)
    probs = np.sum(np.abs(phi) ** 2, axis=1)
    cum = np.cumsum(probs, axis=1)
    target = u_meas * cum[:, -1]
    outcomes = np.minimum(np.sum(cum <= target[:, None], axis=1), 3).astype(np.uint8)
    rows = np.arange(amp.shape[0])
    pm = probs[rows, outcomes]
    if np.any(pm <= _TINY):
        raise FloatingPointError("zero-probability outcome selected")
    out = phi[rows, :, outcomes] / np.sqrt(pm)[:, None]
    return out, outcomes


# DTW
# ---


@njit
def _dtw_numba(s, t):
    m = s.shape[0]
    n = t.shape[0]
    f = np.full((m + 1, n + 1), np.inf)
    f[0, 0] = 0.0
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            best = f[i, j - 1]
            if f[i - 1, j] < best:
                best = f[i - 1, j]
            if f[i - 1, j - 1] < best:
                best = f[i - 1, j - 1]
            f[i, j] = abs(s[i - 1] - t[j - 1]) + best
    return f[m, n]


def _dtw_numpy(s, t):
    """Anti-diagonal wavefront: every cell on diagonal i+j=d depends only on
    diagonals d-1 and d-2, so each diagonal is one vectorised update."""
    m, n = len(s), len(t)
    cost = np.abs(np.subtract.outer(s, t))
    f = np.full((m + 1, n + 1), np.inf)
    f[0, 0] = 0.0
    for d in range(2, m + n + 1):
        i = np.arange(max(1, d - n), min(m, d - 1) + 1)
        j = d - i
        prev = np.minimum(np.minimum(f[i, j - 1], f[i - 1, j]), f[i - 1, j - 1])
        f[i, j] = cost[i - 1, j - 1] + prev
    return float(f[m, n])


# Dispatch
# --------

if USE_NUMBA:
    trajectory_step = _trajectory_step_numba
    dtw_distance = _dtw_numba
else:
    trajectory_step = _trajectory_step_numpy
    dtw_distance = _dtw_numpy

IMPLEMENTATIONS = {
    "trajectory_step": {"numba": _trajectory_step_numba, "numpy": _trajectory_step_numpy},
    "dtw_distance": {"numba": _dtw_numba, "numpy": _dtw_numpy},
}
