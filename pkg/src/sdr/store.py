"""On-disk match databases.

Layout::

    <root>/manifest.json
    <root>/entries/<id>.dots.json
    <root>/entries/<id>.evolved.json

Entry files hold normalized points (and densities for evolved entries);
the manifest records a SHA-256 of every entry file.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import pipeline
from .embedding import HardwareProfile
from .generalization import DotCloud, normalize_points

SCHEMA_VERSION = 1
MANIFEST = "manifest.json"
IMAGE_EXTS = (".pgm", ".png")


class DatabaseError(ValueError):
    pass


@dataclass
class Entry:
    id: str
    kind: str
    file: str
    atom_count: int
    epsilon: float
    checksum: str
    points: np.ndarray | None = None
    densities: np.ndarray | None = None

    def manifest_record(self) -> dict:
        return {"id": self.id, "kind": self.kind, "file": self.file,
                "atom_count": int(self.atom_count), "epsilon": float(f"{self.epsilon:.9g}"),
                "checksum": self.checksum}


@dataclass
class Database:
    root: str
    entries: list[Entry]
    skipped: list[dict] = field(default_factory=list)
    max_atoms: int = HardwareProfile().max_atoms

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, entry_id: str) -> Entry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _ids_after_merge(cloud, reg) -> list:
    if len(reg) == len(cloud):
        return list(cloud.source_polyline_ids)
    return [-1] * len(reg)  # provenance is lost once atoms are merged


def _encode_one(path: str, cfg, evolve_entries: bool):
    cloud = pipeline.encode_file(path, cfg)
    entry_id = os.path.splitext(os.path.basename(path))[0]
    if not evolve_entries:
        # embed anyway so hardware-infeasible images are skipped, then store what was placed
        reg = pipeline.cloud_register(cloud, cfg)
        norm = DotCloud(normalize_points(reg.positions), _ids_after_merge(cloud, reg),
                        cloud.epsilon, cloud.source, cloud.width, cloud.height)
        return entry_id, "dots", norm.to_json(), len(norm), cloud.epsilon
    sim = pipeline.simulate_cloud(cloud, cfg)
    doc = sim.to_dict()
    doc["epsilon"] = cloud.epsilon
    return entry_id, "evolved", json.dumps(doc, indent=1) + "\n", len(sim.register), cloud.epsilon


def build_database(image_dir, out_root, budget: int | None = None,
                   profile: HardwareProfile | None = None, evolve_entries: bool = False,
                   cfg=None, threads: int = 1, log=None) -> Database:
    """Encode every image in `image_dir` (lexicographic order) into a database.

    Images that fail are listed under "skipped" with the reason; the build
    only fails when nothing succeeds.
    """
    cfg = replace(cfg or pipeline.Config())
    if budget is not None:
        cfg.budget = int(budget)
    if profile is not None:
        cfg.profile = profile
    names = sorted(n for n in os.listdir(image_dir) if n.lower().endswith(IMAGE_EXTS))
    if not names:
        raise DatabaseError(f"no images (.pgm/.png) in {image_dir}")
    entries_dir = os.path.join(out_root, "entries")
    os.makedirs(entries_dir, exist_ok=True)

    def work(name):
        try:
            return name, _encode_one(os.path.join(image_dir, name), cfg, evolve_entries), None
        except Exception as exc:  # recorded, not raised: one bad image must not sink a batch
            return name, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = list(pool.map(work, names))

    entries, skipped, seen = [], [], set()
    for name, out, err in outcomes:
        if err is None and out[0] in seen:
            err = f"duplicate entry id {out[0]!r}"
        if err is not None:
            skipped.append({"file": name, "reason": err})
            if log:
                log(f"skip {name}: {err}")
            continue
        entry_id, kind, text, count, eps = out
        seen.add(entry_id)
        rel = f"entries/{entry_id}.{kind}.json"
        path = os.path.join(out_root, rel)
        _write_text(path, text)
        entries.append(Entry(entry_id, kind, rel, count, eps, sha256_file(path)))
        if log:
            log(f"{name}: {count} atoms, epsilon {eps:.4g} px")
    if not entries:
        raise DatabaseError("no image could be encoded: " +
                            "; ".join(f"{s['file']}: {s['reason']}" for s in skipped))
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "max_atoms": cfg.profile.max_atoms,
        "profile": cfg.profile.to_dict(),
        "budget": cfg.budget,
        "evolved": bool(evolve_entries),
        "entries": [e.manifest_record() for e in entries],
        "skipped": skipped,
    }
    _write_text(os.path.join(out_root, MANIFEST), json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return load_database(out_root)


def load_database(root) -> Database:
    """Read and fully verify a database; raises DatabaseError on any defect."""
    mpath = os.path.join(root, MANIFEST)
    if not os.path.isfile(mpath):
        raise DatabaseError(f"missing manifest: {mpath}")
    try:
        with open(mpath, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatabaseError(f"manifest is not valid JSON: {exc}") from None
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DatabaseError(f"unsupported schema version {version!r}")
    max_atoms = int(manifest.get("max_atoms", HardwareProfile().max_atoms))
    entries, seen = [], set()
    for rec in manifest.get("entries", []):
        eid = rec["id"]
        if eid in seen:
            raise DatabaseError(f"duplicate entry id {eid!r}")
        seen.add(eid)
        if rec["kind"] not in ("dots", "evolved"):
            raise DatabaseError(f"entry {eid!r}: unknown kind {rec['kind']!r}")
        path = os.path.join(root, rec["file"])
        if not os.path.isfile(path):
            raise DatabaseError(f"entry {eid!r}: missing file {rec['file']}")
        digest = sha256_file(path)
        if digest != rec["checksum"]:
            raise DatabaseError(f"entry {eid!r}: checksum mismatch ({rec['file']})")
        if rec["atom_count"] > max_atoms:
            raise DatabaseError(f"entry {eid!r}: {rec['atom_count']} atoms exceed max_atoms {max_atoms}")
        pts, dens, _ = pipeline.load_points_file(path)
        if len(pts) != rec["atom_count"]:
            raise DatabaseError(f"entry {eid!r}: atom_count disagrees with its file")
        entries.append(Entry(eid, rec["kind"], rec["file"], int(rec["atom_count"]),
                             float(rec["epsilon"]), digest, pts, dens))
    return Database(os.fspath(root), entries, list(manifest.get("skipped", [])), max_atoms)
