"""Schrodinger evolution under the Rydberg Hamiltonian and readout."""

from __future__ import annotations

import json
import math
import struct
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .rydberg import MAX_DENSE_DIM, BasisSpec, BasisTooLarge, HamiltonianSpec

DEFAULT_DT = 1e-3
KRYLOV_MAX_DIM = 30
KRYLOV_TOL = 1e-10
NORM_ABORT = 1e-4
STATE_MAGIC = b"SDRSTATE"
STATE_VERSION = 1


class NormDriftError(RuntimeError):
    """Norm drifted past the abort threshold; the step is too large."""


@dataclass
class QuantumState:
    amplitudes: np.ndarray
    basis: BasisSpec

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (len(self.basis),):
            raise ValueError("amplitude vector does not match the basis")

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @classmethod
    def ground(cls, basis: BasisSpec) -> "QuantumState":
        amp = np.zeros(len(basis), dtype=np.complex128)
        amp[basis.index_of(0)] = 1.0
        return cls(amp, basis)

    @classmethod
    def from_bitstring(cls, basis: BasisSpec, bits: str) -> "QuantumState":
        amp = np.zeros(len(basis), dtype=np.complex128)
        amp[basis.index_of(bits_to_int(bits))] = 1.0
        return cls(amp, basis)


def bits_to_int(bits: str) -> int:
    """'10' -> atom 0 excited. Character j is atom j."""
    return sum(1 << j for j, c in enumerate(bits) if c == "1")


def int_to_bits(state: int, n: int) -> str:
    return "".join("1" if (state >> j) & 1 else "0" for j in range(n))


def fidelity(a, b) -> float:
    a = getattr(a, "amplitudes", a)
    b = getattr(b, "amplitudes", b)
    return float(abs(np.vdot(a, b)) ** 2)


@dataclass
class EvolutionResult:
    final_state: QuantumState
    densities: np.ndarray
    norm_drift: float
    step_count: int
    wall_time: float

    def to_dict(self) -> dict:
        return {"densities": [float(x) for x in self.densities],
                "norm_drift": float(self.norm_drift), "steps": int(self.step_count)}

    def to_json(self, **extra) -> str:
        doc = self.to_dict()
        doc.update(extra)
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvolutionResult":
        """Inverse of `to_json`; the state and timing are not serialized."""
        doc = json.loads(text)
        return cls(None, np.asarray(doc["densities"], dtype=np.float64),
                   float(doc["norm_drift"]), int(doc["steps"]), 0.0)


# ---------------------------------------------------------------------------
# propagators

def krylov_expm(matvec, psi: np.ndarray, dt: float, m_max: int = KRYLOV_MAX_DIM,
                tol: float = KRYLOV_TOL):
    """exp(-i H dt) psi by Lanczos; None if `m_max` vectors do not reach `tol`.

    The error estimate is beta_m |e_m^T exp(-i dt T_m) e_1| ||psi||, the
    usual a-posteriori bound for Hermitian Krylov propagation.
    """
    beta0 = float(np.linalg.norm(psi))
    if beta0 == 0.0:
        return psi.copy()
    basis = np.empty((m_max + 1, len(psi)), dtype=np.complex128)
    basis[0] = psi / beta0
    alpha, beta = [], []
    for k in range(m_max):
        w = matvec(basis[k])
        a = float(np.vdot(basis[k], w).real)
        w -= a * basis[k]
        if k:
            w -= beta[-1] * basis[k - 1]
        # one reorthogonalisation pass keeps the basis unitary to ~1e-15
        w -= basis[: k + 1].T @ (basis[: k + 1].conj() @ w)
        alpha.append(a)
        b = float(np.linalg.norm(w))
        if len(alpha) == 1:
            lam, q = np.array(alpha), np.ones((1, 1))
        else:
            lam, q = eigh_tridiagonal(np.array(alpha), np.array(beta))
        coef = q @ (np.exp(-1j * dt * lam) * q[0])
        if b * abs(coef[-1]) * beta0 < tol or b < 1e-14 * max(1.0, abs(a)):
            return beta0 * (coef @ basis[: k + 1])
        beta.append(b)
        basis[k + 1] = w / b
    return None


def _krylov_step(matvec, psi, dt, depth=0):
    out = krylov_expm(matvec, psi, dt)
    if out is not None:
        return out, 1
    if depth > 20:  # pragma: no cover
        raise RuntimeError("Krylov propagation failed to converge")
    # split the frozen step until the Krylov space suffices
    half, n1 = _krylov_step(matvec, psi, dt / 2, depth + 1)
    out, n2 = _krylov_step(matvec, half, dt / 2, depth + 1)
    return out, n1 + n2


def _rk4_step(spec: HamiltonianSpec, psi, t, dt):
    h0 = spec.operator(t)
    hm = spec.operator(t + dt / 2)
    h1 = spec.operator(t + dt)
    k1 = -1j * h0(psi)
    k2 = -1j * hm(psi + 0.5 * dt * k1)
    k3 = -1j * hm(psi + 0.5 * dt * k2)
    k4 = -1j * h1(psi + dt * k3)
    return psi + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def step_schedule(duration: float, dt: float) -> list[tuple[float, float]]:
    """(start, length) of every step; a short final step absorbs the remainder."""
    n = int(math.floor(duration / dt + 1e-9))
    steps = [(i * dt, dt) for i in range(n)]
    rest = duration - n * dt
    if rest > 1e-12 * max(1.0, duration):
        steps.append((n * dt, rest))
    return steps


def evolve(spec: HamiltonianSpec, initial: QuantumState | None = None, dt: float = DEFAULT_DT,
           method: str = "krylov", duration: float | None = None, observer=None,
           abort_drift: float = NORM_ABORT) -> EvolutionResult:
    """Integrate i dpsi/dt = H(t) psi from 0 to `duration` (default: the waveform's).

    krylov: H frozen at each step midpoint, exp(-i H dt) by Lanczos.
    rk4: classical Runge-Kutta on the time-dependent equation.
    The state is never renormalised; `observer(t, psi)` sees every step end.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    duration = spec.waves.duration if duration is None else float(duration)
    if dt > duration:
        raise ValueError("dt must not exceed the evolution duration")
    if method not in ("krylov", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    psi0 = QuantumState.ground(spec.basis) if initial is None else initial
    if abs(psi0.norm2 - 1) > 1e-6:
        raise ValueError("initial state is not normalized")
    psi = psi0.amplitudes.copy()
    start = time.perf_counter()
    count = 0
    for t, h in step_schedule(duration, dt):
        if method == "krylov":
            psi, _ = _krylov_step(spec.operator(t + h / 2), psi, h)
        else:
            psi = _rk4_step(spec, psi, t, h)
        count += 1
        drift = abs(1.0 - float(np.vdot(psi, psi).real))
        if drift > abort_drift:
            raise NormDriftError(f"norm drift {drift:.3g} at t = {t + h:.6g} us; reduce dt")
        if observer is not None:
            observer(t + h, psi)
    final = QuantumState(psi, spec.basis)
    return EvolutionResult(final, rydberg_densities(final),
                           abs(1.0 - final.norm2), count, time.perf_counter() - start)


# fourth-order commutator-free Magnus: Gauss nodes and exponent weights
_GAUSS = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)
_CFM4 = ((3 - 2 * math.sqrt(3)) / 12, (3 + 2 * math.sqrt(3)) / 12)


def _dense_expm_apply(h: np.ndarray, dt: float, psi: np.ndarray) -> np.ndarray:
    lam, vec = eigh(h, driver="evr")
    return vec @ (np.exp(-1j * dt * lam) * (vec.conj().T @ psi))


def _knot_schedule(waves, duration: float, dt: float):
    """`step_schedule` with every interval also cut at the waveform knots, so
    no interval straddles a kink."""
    knots = np.unique(np.concatenate([getattr(waves, k).times for k in
                                      ("omega", "delta_g", "delta_l", "phi")]))
    out = []
    for t, h in step_schedule(duration, dt):
        inner = knots[(knots > t + 1e-12) & (knots < t + h - 1e-12)]
        edges = [t, *inner.tolist(), t + h]
        out.extend((a, b - a) for a, b in zip(edges, edges[1:]))
    return out


def exact_reference(spec: HamiltonianSpec, initial: QuantumState | None = None,
                    duration: float | None = None, sample_dt: float = 1e-3,
                    scheme: str = "magnus4") -> QuantumState:
    """Dense propagation through eigendecompositions. Small bases only.

    scheme="magnus4" applies two exponentials per interval built from H at
    the Gauss points (fourth order in the interval); "midpoint" freezes H at
    the interval midpoint, the same rule `evolve` uses.
    """
    if spec.dim > MAX_DENSE_DIM:
        raise BasisTooLarge(f"exact reference limited to {MAX_DENSE_DIM} states")
    if scheme not in ("magnus4", "midpoint"):
        raise ValueError(f"unknown scheme {scheme!r}")
    duration = spec.waves.duration if duration is None else float(duration)
    psi = (QuantumState.ground(spec.basis) if initial is None else initial).amplitudes.copy()
    spec._raising()  # size check before any work
    w = spec.waves
    steps = (step_schedule(duration, sample_dt) if scheme == "midpoint"
             else _knot_schedule(w, duration, sample_dt))
    for t, h in steps:
        if scheme == "midpoint":
            psi = _dense_expm_apply(spec.dense(*w.at(t + h / 2)), h, psi)
            continue
        h1 = spec.dense(*w.at(t + _GAUSS[0] * h))
        h2 = spec.dense(*w.at(t + _GAUSS[1] * h))
        a, b = _CFM4
        psi = _dense_expm_apply(b * h1 + a * h2, h, psi)
        psi = _dense_expm_apply(a * h1 + b * h2, h, psi)
    return QuantumState(psi, spec.basis)


# ---------------------------------------------------------------------------
# readout

def rydberg_densities(state: QuantumState) -> np.ndarray:
    """<n_j> for every atom."""
    p = np.abs(state.amplitudes) ** 2
    states = state.basis.states
    return np.array([p[(states >> j) & 1 == 1].sum() for j in range(state.basis.n_atoms)])


def expectation(spec: HamiltonianSpec, t: float, state) -> float:
    psi = getattr(state, "amplitudes", state)
    return float(np.vdot(psi, spec.operator(t)(psi)).real)


def sample_bitstrings(state: QuantumState, shots: int, seed: int = 0) -> list[str]:
    """Projective readout in the computational basis.

    Uses a Philox counter-based generator so the same seed gives the same
    shots on every platform.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    p = np.abs(state.amplitudes) ** 2
    cdf = np.cumsum(p)
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random(shots) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(p) - 1)
    n = state.basis.n_atoms
    states = state.basis.states
    return [int_to_bits(int(states[i]), n) for i in idx]


# ---------------------------------------------------------------------------
# binary state dump

def write_state(path, state: QuantumState) -> None:
    """Header ``SDRSTATE`` + u32 version + u32 dimension, then little-endian
    (re, im) float64 pairs in basis order."""
    amp = np.ascontiguousarray(state.amplitudes, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(STATE_MAGIC + struct.pack("<II", STATE_VERSION, len(amp)))
        fh.write(amp.tobytes())


def read_state(path, basis: BasisSpec) -> QuantumState:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:8] != STATE_MAGIC:
            raise ValueError("not an SDR state file")
        version, dim = struct.unpack("<II", head[8:])
        if version != STATE_VERSION:
            raise ValueError(f"unsupported state file version {version}")
        amp = np.frombuffer(fh.read(), dtype="<c16")
    if len(amp) != dim or dim != len(basis):
        raise ValueError("state file dimension does not match the basis")
    return QuantumState(amp.astype(np.complex128), basis)
