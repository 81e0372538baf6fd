"""Placing a dot cloud on a neutral-atom device.

Units throughout: lengths in um, angular frequencies in rad/us, times in us.
Use `mhz_to_rad_us` / `rad_us_to_mhz` at the boundary when quoting
datasheet numbers in MHz (cycles per us).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

TWO_PI = 2 * math.pi


def mhz_to_rad_us(f: float) -> float:
    return TWO_PI * f


def rad_us_to_mhz(w: float) -> float:
    return w / TWO_PI


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class HardwareProfile:
    """Geometry and control limits of the target device.

    Defaults follow the publicly documented Aquila envelope; they are
    configuration, not anything the pipeline depends on.
    """

    area_width: float = 75.0
    area_height: float = 76.0
    min_spacing: float = 4.0
    max_atoms: int = 256
    c6: float = TWO_PI * 862690.0
    omega_max: float = TWO_PI * 2.5
    delta_abs_max: float = TWO_PI * 20.0
    t_max: float = 4.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"HardwareProfile.{f.name} must be positive")
        if self.max_atoms < 1:
            raise ValueError("max_atoms must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HardwareProfile":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown profile fields: {sorted(unknown)}")
        kw = {k: (int(v) if k == "max_atoms" else float(v)) for k, v in d.items()}
        return cls(**kw)

    def replace(self, **changes) -> "HardwareProfile":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return HardwareProfile.from_dict(d)


def blockade_radius(c6: float, omega: float) -> float:
    """R_b = (C6 / Omega) ** (1/6)."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    return (c6 / omega) ** (1.0 / 6.0)


@dataclass
class AtomRegister:
    positions: np.ndarray  # (n, 2) um
    local_scale: np.ndarray  # alpha_j
    profile: HardwareProfile = field(default_factory=HardwareProfile)
    provenance: str = ""
    merged: np.ndarray | None = None  # True where an atom came from a merge

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.local_scale = np.asarray(self.local_scale, dtype=np.float64).reshape(-1)
        if len(self.local_scale) != len(self.positions):
            raise ValueError("one local detuning scale per atom required")
        if self.merged is None:
            self.merged = np.zeros(len(self.positions), dtype=bool)

    def __len__(self):
        return len(self.positions)

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "profile": self.profile.to_dict(),
            "positions_um": [[float(x), float(y)] for x, y in self.positions],
            "alpha": [float(a) for a in self.local_scale],
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AtomRegister":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported register version {doc.get('version')!r}")
        return cls(np.asarray(doc["positions_um"], dtype=np.float64).reshape(-1, 2),
                   np.asarray(doc["alpha"], dtype=np.float64),
                   HardwareProfile.from_dict(doc["profile"]), doc.get("provenance", ""))


@dataclass(frozen=True)
class Violation:
    kind: str  # "area" or "spacing"
    indices: tuple
    value: float
    detail: str

    def __str__(self):
        return self.detail


def _pair_distances(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def validate(register: AtomRegister) -> list[Violation]:
    """All geometry violations of `register`; never raises."""
    prof = register.profile
    out = []
    pos = register.positions
    for i, (x, y) in enumerate(pos):
        if not (0.0 <= x <= prof.area_width and 0.0 <= y <= prof.area_height):
            out.append(Violation("area", (i,), float(max(x, y)),
                                 f"atom {i} at ({x:g}, {y:g}) um lies outside the "
                                 f"{prof.area_width:g} x {prof.area_height:g} um area"))
    if len(pos) > 1:
        d = _pair_distances(pos)
        for i, j in zip(*np.triu_indices(len(pos), 1)):
            if d[i, j] < prof.min_spacing:
                out.append(Violation("spacing", (int(i), int(j)), float(d[i, j]),
                                     f"atoms {i} and {j} are {d[i, j]:g} um apart "
                                     f"(minimum {prof.min_spacing:g} um)"))
    if len(pos) > prof.max_atoms:
        out.append(Violation("count", (), float(len(pos)),
                             f"{len(pos)} atoms exceed the device limit of {prof.max_atoms}"))
    return out


def _merge_close(pos: np.ndarray, min_spacing: float):
    pos = [np.array(p) for p in pos]
    merged = [False] * len(pos)
    while len(pos) > 1:
        arr = np.array(pos)
        d = _pair_distances(arr)
        d[np.tril_indices(len(arr))] = np.inf
        i, j = np.unravel_index(np.argmin(d), d.shape)
        if d[i, j] >= min_spacing:
            break
        mid = 0.5 * (pos[i] + pos[j])
        for k in (j, i):  # j > i
            del pos[k]
            del merged[k]
        pos.insert(i, mid)
        merged.insert(i, True)
    return np.array(pos).reshape(-1, 2), np.array(merged, dtype=bool)


def embed(cloud, profile: HardwareProfile | None = None, alpha_default: float = 1.0,
          strict: bool = False) -> AtomRegister:
    """Scale normalized dots onto the device area.

    A single factor ``min(area_width, area_height)`` is applied to both axes
    and the bounding box is centred in the area. Pairs closer than
    ``min_spacing`` are merged into their midpoint, closest pair first, unless
    `strict` is set, in which case they are an error.
    """
    profile = profile or HardwareProfile()
    if not 0.0 <= alpha_default <= 1.0:
        raise ValueError("alpha_default must lie in [0, 1]")
    pts = np.asarray(getattr(cloud, "points", cloud), dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise EmbeddingError("cannot embed an empty dot cloud")
    if len(pts) > profile.max_atoms:
        raise EmbeddingError(f"{len(pts)} dots exceed the device limit of {profile.max_atoms} atoms")
    s = min(profile.area_width, profile.area_height)
    centre = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    area_centre = np.array([profile.area_width, profile.area_height]) / 2
    pos = area_centre + s * (pts - centre)
    provenance = getattr(cloud, "source", "")
    reg = AtomRegister(pos, np.full(len(pos), alpha_default), profile, provenance)
    spacing = [v for v in validate(reg) if v.kind == "spacing"]
    if spacing:
        if strict:
            raise EmbeddingError("; ".join(map(str, spacing)))
        n_in = len(pos)
        pos, merged = _merge_close(pos, profile.min_spacing)
        # one merge of a lone pair is fine; a longer cascade ending below two atoms is not
        if len(pos) < 2 and n_in > 2:
            raise EmbeddingError("merging atoms closer than the minimum spacing left fewer than 2 atoms")
        reg = AtomRegister(pos, np.full(len(pos), alpha_default), profile, provenance, merged)
    problems = validate(reg)
    if problems:  # pragma: no cover - scaling keeps atoms inside the area
        raise EmbeddingError("; ".join(map(str, problems)))
    return reg


def interaction_matrix(register: AtomRegister) -> np.ndarray:
    """V_jk = C6 / d_jk**6 (rad/us), zero diagonal."""
    pos = register.positions
    n = len(pos)
    v = np.zeros((n, n))
    if n < 2:
        return v
    iu = np.triu_indices(n, 1)
    dx = pos[iu[0], 0] - pos[iu[1], 0]
    dy = pos[iu[0], 1] - pos[iu[1], 1]
    s2 = dx * dx + dy * dy  # no square root: one rounding fewer
    d6 = s2 * s2 * s2
    if np.any(d6 == 0):  # coincident, or so close that d**6 underflows
        i = int(np.argmin(d6))
        raise EmbeddingError(f"atoms {iu[0][i]} and {iu[1][i]} coincide")
    vals = register.profile.c6 / d6
    v[iu] = vals
    v[iu[::-1]] = vals
    return v
