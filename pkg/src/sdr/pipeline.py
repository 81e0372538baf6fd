"""End-to-end encode and simulate steps with one configuration object."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import evolution
from .embedding import AtomRegister, HardwareProfile, blockade_radius, embed
from .generalization import (DEFAULT_SPACING, DotCloud, normalize_cloud, normalize_points,
                             resample_equidistant, simplify_to_budget)
from .imaging import (DEFAULT_THRESHOLD, GrayImage, load_image, sobel_magnitude, thin_edges,
                      threshold_edges, trace_contours)
from .rydberg import WaveformSet, build_hamiltonian, default_adiabatic_waveforms

# epsilon search bracket as a fraction of the longer image side
EPS_FRACTIONS = (0.01, 0.25)


@dataclass
class Config:
    profile: HardwareProfile = field(default_factory=HardwareProfile)
    threshold: float = DEFAULT_THRESHOLD
    spacing: float = DEFAULT_SPACING
    budget: int = 21
    eps_range: tuple | None = None  # pixels; None derives it from EPS_FRACTIONS
    thin: bool = True
    min_polyline: int = 5  # pixels; shorter traced fragments are dropped
    duration: float = 4.0
    dt: float = evolution.DEFAULT_DT
    method: str = "krylov"
    basis: str = "full"
    blockade_radius: float | None = None  # um; None means R_b at omega_max
    strict: bool = False
    alpha: float = 1.0
    match_mode: str = "geometry"
    seed: int = 0
    shots: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["profile"] = self.profile.to_dict()
        if self.eps_range is not None:
            d["eps_range"] = list(self.eps_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        d = dict(d)
        if "profile" in d:
            d["profile"] = HardwareProfile().replace(**d["profile"])
        if d.get("eps_range") is not None:
            d["eps_range"] = tuple(float(x) for x in d["eps_range"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "Config":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def eps_for(self, width: int, height: int) -> tuple[float, float]:
        if self.eps_range is not None:
            return self.eps_range
        side = max(width, height)
        return EPS_FRACTIONS[0] * side, EPS_FRACTIONS[1] * side

    def rb(self) -> float:
        if self.blockade_radius is not None:
            return self.blockade_radius
        return blockade_radius(self.profile.c6, self.profile.omega_max)


def image_polylines(img: GrayImage, cfg: Config):
    edges = threshold_edges(sobel_magnitude(img), cfg.threshold)
    if cfg.thin:
        edges = thin_edges(edges)
    lines = [ln for ln in trace_contours(edges) if len(ln) >= cfg.min_polyline]
    return [resample_equidistant(ln, cfg.spacing) for ln in lines]


def encode_image(img: GrayImage, cfg: Config, source: str = "") -> DotCloud:
    """Sobel edges -> thinned contours -> equidistant dots -> budgeted RDP."""
    lines = image_polylines(img, cfg)
    if not lines:
        raise ValueError(f"no edges found in {source or 'image'}")
    return simplify_to_budget(lines, cfg.budget, cfg.eps_for(img.width, img.height),
                              width=img.width, height=img.height, source=source)


def encode_file(path, cfg: Config) -> DotCloud:
    return encode_image(load_image(path), cfg, os.path.basename(os.fspath(path)))


def cloud_register(cloud: DotCloud, cfg: Config) -> AtomRegister:
    return embed(normalize_cloud(cloud), cfg.profile, cfg.alpha, strict=cfg.strict)


@dataclass
class Simulation:
    register: AtomRegister
    waves: WaveformSet
    result: evolution.EvolutionResult
    counts: dict | None = None

    def to_dict(self) -> dict:
        doc = {"version": 1, "kind": "evolved", "source": self.register.provenance}
        doc.update(self.result.to_dict())
        doc["positions_um"] = [[float(x), float(y)] for x, y in self.register.positions]
        doc["points"] = [[float(x), float(y)] for x, y in normalize_points(self.register.positions)]
        if self.counts is not None:
            doc["counts"] = self.counts
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def simulate_cloud(cloud: DotCloud, cfg: Config, waves: WaveformSet | None = None) -> Simulation:
    """Embed, drive with `waves` (default: adiabatic sweep) and evolve from all-ground."""
    reg = cloud_register(cloud, cfg)
    if waves is None:
        waves = default_adiabatic_waveforms(cfg.profile, cfg.duration)
    spec = build_hamiltonian(reg, waves, cfg.basis,
                             cfg.rb() if cfg.basis == "blockade" else None)
    res = evolution.evolve(spec, dt=cfg.dt, method=cfg.method)
    counts = None
    if cfg.shots:
        shots = evolution.sample_bitstrings(res.final_state, cfg.shots, cfg.seed)
        counts = {}
        for s in shots:
            counts[s] = counts.get(s, 0) + 1
        counts = dict(sorted(counts.items()))
    return Simulation(reg, waves, res, counts)


def load_points_file(path):
    """Points (and densities, if any) from a dot-cloud or simulation JSON file."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    pts = np.asarray(doc["points"], dtype=np.float64).reshape(-1, 2)
    dens = doc.get("densities")
    return pts, (None if dens is None else np.asarray(dens, dtype=np.float64)), doc
