"""Drive schedules and the time-dependent Rydberg Hamiltonian.

    H(t) = Omega(t)/2 sum_j (e^{i phi} |g_j><r_j| + e^{-i phi} |r_j><g_j|)
           + sum_{j<k} V_jk n_j n_k - sum_j (Delta_g(t) + alpha_j Delta_l(t)) n_j

Basis states are integers: bit j set means atom j is in |r>. With phi = 0
this is exactly the textbook Rydberg array Hamiltonian.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .embedding import AtomRegister, HardwareProfile, interaction_matrix

MAX_FULL_ATOMS = 24
MAX_BLOCKADE_STATES = 1 << 24
MAX_DENSE_DIM = 1 << 10


class BasisTooLarge(ValueError):
    pass


# ---------------------------------------------------------------------------
# waveforms

@dataclass(frozen=True)
class Waveform:
    """Piecewise-linear schedule, clamped outside its sample range."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64).reshape(-1)
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if len(t) == 0 or len(t) != len(v):
            raise ValueError("waveform needs matching, non-empty times and values")
        if t[0] != 0.0:
            raise ValueError("waveform must start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("waveform times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_samples(cls, samples) -> "Waveform":
        arr = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def constant(cls, value: float, duration: float = 1.0) -> "Waveform":
        return cls([0.0, duration], [value, value])

    def samples(self) -> list:
        return [[float(t), float(v)] for t, v in zip(self.times, self.values)]

    def __call__(self, t):
        return eval_waveform(self, t)


def eval_waveform(w: Waveform, t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("waveforms are defined for t >= 0")
    out = np.interp(t, w.times, w.values)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class WaveformSet:
    omega: Waveform
    delta_g: Waveform
    delta_l: Waveform
    phi: Waveform
    duration: float

    def at(self, t: float) -> tuple[float, float, float, float]:
        return (eval_waveform(self.omega, t), eval_waveform(self.delta_g, t),
                eval_waveform(self.delta_l, t), eval_waveform(self.phi, t))

    def to_json(self) -> str:
        doc = {"omega": self.omega.samples(), "delta_g": self.delta_g.samples(),
               "delta_l": self.delta_l.samples(), "phi": self.phi.samples(),
               "duration": float(self.duration)}
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "WaveformSet":
        doc = json.loads(text)
        return cls(*(Waveform.from_samples(doc[k]) for k in ("omega", "delta_g", "delta_l", "phi")),
                   float(doc["duration"]))

    @classmethod
    def constant(cls, omega=0.0, delta_g=0.0, delta_l=0.0, phi=0.0, duration=1.0):
        return cls(Waveform.constant(omega, duration), Waveform.constant(delta_g, duration),
                   Waveform.constant(delta_l, duration), Waveform.constant(phi, duration),
                   float(duration))


def check_waveforms(waves: WaveformSet, profile: HardwareProfile) -> list[str]:
    """Hardware limits a schedule breaks (empty when it is runnable)."""
    problems = []
    om = waves.omega.values
    if om.min() < 0:
        problems.append("Rabi frequency must be non-negative")
    if om.max() > profile.omega_max * (1 + 1e-12):
        problems.append(f"Rabi frequency {om.max():g} exceeds omega_max {profile.omega_max:g} rad/us")
    for name in ("delta_g", "delta_l"):
        d = getattr(waves, name).values
        if np.abs(d).max() > profile.delta_abs_max * (1 + 1e-12):
            problems.append(f"{name} magnitude {np.abs(d).max():g} exceeds {profile.delta_abs_max:g} rad/us")
    if waves.duration > profile.t_max * (1 + 1e-12):
        problems.append(f"duration {waves.duration:g} us exceeds t_max {profile.t_max:g} us")
    if eval_waveform(waves.omega, 0.0) != 0.0 or eval_waveform(waves.omega, waves.duration) != 0.0:
        problems.append("Rabi drive must start and end at zero")
    return problems


def default_adiabatic_waveforms(profile: HardwareProfile, duration: float | None = None) -> WaveformSet:
    """Ramp-hold-ramp drive with a linear detuning sweep through resonance.

    Omega rises to omega_max over the first 10 % and falls over the last
    10 %; Delta_g goes linearly from -delta_abs_max/2 to +delta_abs_max/2.
    """
    duration = profile.t_max if duration is None else float(duration)
    if not 0 < duration <= profile.t_max:
        raise ValueError(f"duration must lie in (0, {profile.t_max:g}] us")
    om = profile.omega_max
    ramp = 0.1 * duration
    omega = Waveform([0.0, ramp, duration - ramp, duration], [0.0, om, om, 0.0])
    half = profile.delta_abs_max / 2
    delta_g = Waveform([0.0, duration], [-half, half])
    zero = Waveform.constant(0.0, duration)
    return WaveformSet(omega, delta_g, zero, zero, duration)


# ---------------------------------------------------------------------------
# basis

@dataclass(frozen=True)
class BasisSpec:
    mode: str
    n_atoms: int
    states: np.ndarray  # ascending bitmasks
    blockade_radius: float | None = None

    def __len__(self):
        return len(self.states)

    def index_of(self, bitmask: int) -> int:
        i = int(np.searchsorted(self.states, bitmask))
        if i >= len(self.states) or self.states[i] != bitmask:
            raise KeyError(f"state {bitmask:b} not in basis")
        return i


def _independent_sets(adj: list[int], n: int) -> np.ndarray:
    states = np.zeros(1, dtype=np.int64)
    for j in range(n):
        ok = states[(states & adj[j]) == 0]
        states = np.concatenate([states, ok | (1 << j)])
        if len(states) > MAX_BLOCKADE_STATES:
            raise BasisTooLarge(f"blockade basis exceeds {MAX_BLOCKADE_STATES} states")
    return np.sort(states)


def enumerate_basis(register: AtomRegister, mode: str = "full",
                    blockade_radius: float | None = None) -> BasisSpec:
    """Full 2**N basis, or the independent sets of the blockade graph."""
    n = len(register)
    if mode == "full":
        if n > MAX_FULL_ATOMS:
            raise BasisTooLarge(f"{n} atoms exceed the full-basis limit of {MAX_FULL_ATOMS}; "
                                "use the blockade basis")
        return BasisSpec("full", n, np.arange(1 << n, dtype=np.int64))
    if mode != "blockade":
        raise ValueError(f"unknown basis mode {mode!r}")
    if blockade_radius is None or blockade_radius <= 0:
        raise ValueError("blockade mode needs a positive blockade radius")
    pos = register.positions
    d = np.hypot(*(pos[:, None, :] - pos[None, :, :]).transpose(2, 0, 1))
    adj = []
    for j in range(n):
        mask = 0
        for k in np.flatnonzero(d[j] < blockade_radius):
            if k != j:
                mask |= 1 << int(k)
        adj.append(mask)
    return BasisSpec("blockade", n, _independent_sets(adj, n), float(blockade_radius))


# ---------------------------------------------------------------------------
# Hamiltonian

@dataclass
class HamiltonianSpec:
    register: AtomRegister
    waves: WaveformSet
    basis: BasisSpec
    v_matrix: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.v_matrix is None:
            self.v_matrix = interaction_matrix(self.register)
        if self.basis.n_atoms != len(self.register):
            raise ValueError("basis and register disagree on the atom count")
        n = self.basis.n_atoms
        states = self.basis.states
        e_int = np.zeros(len(states))
        n_exc = np.zeros(len(states))
        alpha_sum = np.zeros(len(states))
        bits = [((states >> j) & 1).astype(bool) for j in range(n)]
        for j in range(n):
            n_exc += bits[j]
            alpha_sum += self.register.local_scale[j] * bits[j]
            for k in range(j + 1, n):
                if self.v_matrix[j, k]:
                    e_int += self.v_matrix[j, k] * (bits[j] & bits[k])
        self._cache.update(e_int=e_int, n_exc=n_exc, alpha_sum=alpha_sum)
        if self.basis.mode != "full":
            pairs = []
            for j in range(n):
                src = np.flatnonzero(~bits[j])
                tgt = states[src] | (1 << j)
                pos = np.searchsorted(states, tgt)
                pos = np.minimum(pos, len(states) - 1)
                hit = states[pos] == tgt
                pairs.append((src[hit], pos[hit]))
            self._cache["pairs"] = pairs

    @property
    def dim(self) -> int:
        return len(self.basis)

    def consistent(self, rtol: float = 0.0) -> bool:
        return np.allclose(self.v_matrix, interaction_matrix(self.register), rtol=rtol, atol=0.0)

    def diagonal(self, delta_g: float, delta_l: float) -> np.ndarray:
        c = self._cache
        return c["e_int"] - delta_g * c["n_exc"] - delta_l * c["alpha_sum"]

    def frozen(self, omega: float, delta_g: float, delta_l: float, phi: float):
        """Matrix-free H for fixed control values: returns psi -> H psi."""
        diag = self.diagonal(delta_g, delta_l)
        up = 0.5 * omega * np.exp(1j * phi)     # <g|H|r>
        down = np.conj(up)                       # <r|H|g>
        n = self.basis.n_atoms
        dim = self.dim
        if omega == 0.0:
            return lambda psi: diag * psi
        if self.basis.mode == "full":
            def matvec(psi):
                out = diag * psi
                for j in range(n):
                    pv = psi.reshape(dim >> (j + 1), 2, 1 << j)
                    ov = out.reshape(dim >> (j + 1), 2, 1 << j)
                    ov[:, 1, :] += down * pv[:, 0, :]
                    ov[:, 0, :] += up * pv[:, 1, :]
                return out
        else:
            pairs = self._cache["pairs"]

            def matvec(psi):
                out = diag * psi
                for src, dst in pairs:
                    out[dst] += down * psi[src]
                    out[src] += up * psi[dst]
                return out
        return matvec

    def operator(self, t: float):
        return self.frozen(*self.waves.at(t))

    def _raising(self) -> np.ndarray:
        """Dense sum_j |r_j><g_j| restricted to the basis (small bases only)."""
        if "raising" not in self._cache:
            dim = self.dim
            if dim > MAX_DENSE_DIM:
                raise BasisTooLarge(f"dense materialization limited to {MAX_DENSE_DIM} states")
            lift = np.zeros((dim, dim))
            states = self.basis.states
            for j in range(self.basis.n_atoms):
                src = np.flatnonzero(((states >> j) & 1) == 0)
                tgt = states[src] | (1 << j)
                pos = np.minimum(np.searchsorted(states, tgt), dim - 1)
                hit = states[pos] == tgt
                lift[pos[hit], src[hit]] = 1.0
            self._cache["raising"] = lift
        return self._cache["raising"]

    def dense(self, omega: float, delta_g: float, delta_l: float, phi: float) -> np.ndarray:
        """H for fixed control values as a dense array; real when phi = 0."""
        lift = self._raising()
        h = np.diag(self.diagonal(delta_g, delta_l))
        if omega:
            if phi == 0.0:
                h = h + 0.5 * omega * (lift + lift.T)
            else:
                down = 0.5 * omega * np.exp(-1j * phi)
                h = h + down * lift + np.conj(down) * lift.T
        return h


def build_hamiltonian(register: AtomRegister, waves: WaveformSet, mode: str = "full",
                      blockade_radius: float | None = None) -> HamiltonianSpec:
    return HamiltonianSpec(register, waves, enumerate_basis(register, mode, blockade_radius))


def _amplitudes(state):
    return getattr(state, "amplitudes", state)


def apply_hamiltonian(spec: HamiltonianSpec, t: float, state):
    """H(t)|psi>. Accepts a bare amplitude vector or anything with `.amplitudes`."""
    psi = np.asarray(_amplitudes(state), dtype=np.complex128)
    if psi.shape != (spec.dim,):
        raise ValueError(f"state has dimension {psi.shape}, basis has {spec.dim}")
    out = spec.operator(t)(psi)
    if hasattr(state, "amplitudes"):
        return type(state)(out, state.basis)
    return out


def dense_hamiltonian(spec: HamiltonianSpec, t: float, matvec=None) -> np.ndarray:
    """Materialize H(t) column by column. Small bases only (test oracle)."""
    if spec.dim > MAX_DENSE_DIM:
        raise BasisTooLarge(f"dense materialization limited to {MAX_DENSE_DIM} states")
    if matvec is None:
        return spec.dense(*spec.waves.at(t)).astype(np.complex128)
    h = np.empty((spec.dim, spec.dim), dtype=np.complex128)
    e = np.zeros(spec.dim, dtype=np.complex128)
    for i in range(spec.dim):
        e[i] = 1.0
        h[:, i] = matvec(e)
        e[i] = 0.0
    return h


def hermiticity_check(spec: HamiltonianSpec, t: float, matvec=None) -> float:
    """max |H - H^dagger| with H built by applying `matvec` (default: the
    operator itself) to unit vectors."""
    h = dense_hamiltonian(spec, t, matvec or spec.operator(t))
    return float(np.abs(h - h.conj().T).max())
