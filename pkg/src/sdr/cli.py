"""Command line interface: ``sdr encode|simulate|match|db-build|db-verify``.

Exit codes
    0  success
    1  unexpected internal error
    2  bad input (missing/unreadable file, malformed JSON, wrong input kind)
    3  atom budget unreachable
    4  hardware constraint violated (spacing in strict mode, basis too large, limits)
    5  evolution aborted on norm drift
    6  empty database
    7  database build produced no entries

Standard output carries JSON only; diagnostics go to standard error and are
silenced by --json, in which case failures are reported as a JSON object
``{"error": ..., "exit_code": ...}`` on standard output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import pipeline, plotting, store
from .embedding import EmbeddingError
from .evolution import NormDriftError, write_state
from .generalization import BudgetError, DotCloud
from .imaging import ImageError
from .matching import MatchError, WeightedCloud, match_query
from .pipeline import Config
from .rydberg import BasisTooLarge, WaveformSet, check_waveforms

EXIT_INPUT, EXIT_BUDGET, EXIT_HARDWARE, EXIT_DRIFT, EXIT_EMPTY_DB, EXIT_NO_ENTRIES = 2, 3, 4, 5, 6, 7

PROFILE_FLAGS = {
    "area_width": float, "area_height": float, "min_spacing": float, "max_atoms": int,
    "c6": float, "omega_max": float, "delta_abs_max": float, "t_max": float,
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class Parser(argparse.ArgumentParser):
    """Usage errors become exit code 2 through the normal error path."""

    def error(self, message):
        raise CliError(f"{self.prog}: {message}", EXIT_INPUT)


class Output:
    def __init__(self, json_only: bool):
        self.json_only = json_only

    def info(self, msg: str) -> None:
        if not self.json_only:
            print(msg, file=sys.stderr)

    def emit(self, doc, compact: bool = False) -> None:
        if compact:
            print(json.dumps(doc, separators=(",", ":")))
        else:
            print(json.dumps(doc, indent=1))


# ---------------------------------------------------------------------------
# config

def resolve_config(args) -> Config:
    """Defaults < config file (--config, else $SDR_CONFIG) < command-line flags."""
    path = args.config or os.environ.get("SDR_CONFIG")
    try:
        cfg = Config.load(path) if path else Config()
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}", EXIT_INPUT) from None
    except (ValueError, TypeError) as exc:
        raise CliError(f"bad config file {path}: {exc}", EXIT_INPUT) from None
    overrides = {k: getattr(args, k) for k in PROFILE_FLAGS if getattr(args, k, None) is not None}
    if overrides:
        try:
            cfg.profile = cfg.profile.replace(**overrides)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_INPUT) from None
    simple = ("threshold", "spacing", "budget", "duration", "dt", "method", "basis",
              "blockade_radius", "seed", "shots", "alpha")
    for name in simple:
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "mode", None) is not None:
        cfg.match_mode = args.mode
    if getattr(args, "strict", False):
        cfg.strict = True
    if getattr(args, "eps_min", None) is not None or getattr(args, "eps_max", None) is not None:
        if args.eps_min is None or args.eps_max is None:
            raise CliError("--eps-min and --eps-max must be given together", EXIT_INPUT)
        cfg.eps_range = (args.eps_min, args.eps_max)
    return cfg


def _read_json(path, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError(f"{what} not found: {path}", EXIT_INPUT) from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CliError(f"{what} {path} is not valid JSON: {exc}", EXIT_INPUT) from None


def _write(path, text: str) -> None:
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# commands

def cmd_encode(args, cfg: Config, out: Output):
    try:
        cloud = pipeline.encode_file(args.input, cfg)
    except ImageError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    except BudgetError as exc:
        raise CliError(str(exc), EXIT_BUDGET) from None
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    _write(args.out, cloud.to_json())
    if args.plot:
        extent = (cloud.width / max(cloud.width, cloud.height), cloud.height / max(cloud.width, cloud.height))
        plotting.write_svg(args.plot, plotting.scatter_svg(cloud.points, extent, title=cloud.source))
    out.info(f"{cloud.source}: {len(cloud)} dots at epsilon {cloud.epsilon:.4g} px -> {args.out}")
    out.emit({"atoms": len(cloud), "epsilon": float(f"{cloud.epsilon:.9g}"),
              "source": cloud.source, "out": os.fspath(args.out)}, compact=True)


def cmd_simulate(args, cfg: Config, out: Output):
    doc = _read_json(args.dots, "dot cloud")
    try:
        cloud = DotCloud.from_json(json.dumps(doc))
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"{args.dots} is not a dot cloud file: {exc}", EXIT_INPUT) from None
    waves = None
    if args.waveforms:
        try:
            waves = WaveformSet.from_json(json.dumps(_read_json(args.waveforms, "waveform file")))
        except (KeyError, ValueError, TypeError) as exc:
            raise CliError(f"bad waveform file: {exc}", EXIT_INPUT) from None
        if cfg.strict:
            problems = check_waveforms(waves, cfg.profile)
            if problems:
                raise CliError("; ".join(problems), EXIT_HARDWARE)
    try:
        sim = pipeline.simulate_cloud(cloud, cfg, waves)
    except BasisTooLarge as exc:
        hint = " (pass --basis blockade)" if cfg.basis == "full" else ""
        raise CliError(f"{exc}{hint}", EXIT_HARDWARE) from None
    except EmbeddingError as exc:
        raise CliError(str(exc), EXIT_HARDWARE) from None
    except NormDriftError as exc:
        raise CliError(str(exc), EXIT_DRIFT) from None
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    _write(args.out, sim.to_json())
    if args.state_out:
        write_state(args.state_out, sim.result.final_state)
    if args.plot:
        p = cfg.profile
        plotting.write_svg(args.plot, plotting.scatter_svg(
            sim.register.positions, (p.area_width, p.area_height), sim.result.densities,
            title=cloud.source))
    res = sim.result
    out.info(f"{len(sim.register)} atoms, {res.step_count} steps, drift {res.norm_drift:.2e}, "
             f"{res.wall_time:.1f} s -> {args.out}")
    out.emit({"atoms": len(sim.register), "steps": res.step_count,
              "norm_drift": res.norm_drift, "densities": [float(x) for x in res.densities],
              "out": os.fspath(args.out)})


def _load_db(path):
    try:
        return store.load_database(path)
    except store.DatabaseError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def cmd_match(args, cfg: Config, out: Output):
    doc = _read_json(args.query, "query")
    if "points" not in doc:
        raise CliError(f"{args.query} holds no points", EXIT_INPUT)
    pts = np.asarray(doc["points"], dtype=np.float64).reshape(-1, 2)
    dens = doc.get("densities")
    mode = cfg.match_mode
    if mode == "density_weighted" and dens is None:
        raise CliError("density_weighted matching needs a simulation result as --query "
                       "(output of `sdr simulate`), not a plain dot cloud", EXIT_INPUT)
    db = _load_db(args.db)
    if len(db) == 0:
        raise CliError(f"database {args.db} has no entries", EXIT_EMPTY_DB)
    try:
        query = WeightedCloud(pts, dens if mode == "density_weighted" else None)
        result = match_query(query, db, mode)
    except MatchError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    if args.top:
        result = result.top(args.top)
    best_id, best_d = result.ranking[0]
    out.info(f"best match: {best_id} (Chamfer distance {best_d:.6g})")
    out.emit(result.to_dict())


def cmd_db_build(args, cfg: Config, out: Output):
    if not os.path.isdir(args.images):
        raise CliError(f"image directory not found: {args.images}", EXIT_INPUT)
    try:
        db = store.build_database(args.images, args.out, cfg.budget, cfg.profile, args.evolve,
                                  cfg, threads=args.threads or os.cpu_count() or 1, log=out.info)
    except store.DatabaseError as exc:
        raise CliError(str(exc), EXIT_NO_ENTRIES) from None
    out.emit({"root": os.fspath(args.out), "entries": len(db), "skipped": db.skipped,
              "atom_counts": {e.id: e.atom_count for e in db.entries}})


def cmd_db_verify(args, cfg: Config, out: Output):
    db = _load_db(args.db)
    out.info(f"{args.db}: {len(db)} entries verified")
    out.emit({"root": os.fspath(args.db), "entries": len(db), "ok": True})


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = Parser(add_help=False)
    common.add_argument("--config", help="JSON config file (default: $SDR_CONFIG)")
    common.add_argument("--seed", type=int)
    common.add_argument("--json", action="store_true", help="machine-readable output only")
    common.add_argument("--threads", type=int, help="worker threads (default: logical cores)")
    for name, typ in PROFILE_FLAGS.items():
        common.add_argument("--" + name.replace("_", "-"), dest=name, type=typ,
                            help="hardware profile override")

    parser = Parser(prog="sdr", description="Sparse dot image pipeline")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("encode", parents=[common], help="image -> sparse dot cloud")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--spacing", type=float)
    p.add_argument("--eps-min", type=float)
    p.add_argument("--eps-max", type=float)
    p.add_argument("--plot", help="write an SVG of the dots")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("simulate", parents=[common], help="dot cloud -> evolved atom register")
    p.add_argument("--dots", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--method", choices=("krylov", "rk4"))
    p.add_argument("--waveforms", help="WaveformSet JSON (default: adiabatic sweep)")
    p.add_argument("--basis", choices=("full", "blockade"))
    p.add_argument("--blockade-radius", type=float)
    p.add_argument("--alpha", type=float, help="local detuning scale for every atom")
    p.add_argument("--strict", action="store_true", help="reject instead of merging close atoms")
    p.add_argument("--shots", type=int, help="sample this many bitstrings (uses --seed)")
    p.add_argument("--state-out", help="binary dump of the final state")
    p.add_argument("--plot", help="write a density-shaded SVG of the atoms")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("match", parents=[common], help="rank database entries against a query")
    p.add_argument("--query", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--top", type=int)
    p.add_argument("--mode", choices=("geometry", "density_weighted"))
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("db-build", parents=[common], help="encode a directory of images")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--evolve", action="store_true", help="also simulate every entry")
    p.add_argument("--duration", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--method", choices=("krylov", "rk4"))
    p.add_argument("--basis", choices=("full", "blockade"))
    p.set_defaults(func=cmd_db_build)

    p = sub.add_parser("db-verify", parents=[common], help="check a database's checksums")
    p.add_argument("--db", required=True)
    p.set_defaults(func=cmd_db_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        if "--json" in argv:
            Output(True).emit({"error": str(exc), "exit_code": exc.code}, compact=True)
        else:
            parser.print_usage(sys.stderr)
            print(exc, file=sys.stderr)
        return exc.code
    out = Output(args.json)
    try:
        cfg = resolve_config(args)
        args.func(args, cfg, out)
        return 0
    except CliError as exc:
        if args.json:
            out.emit({"error": str(exc), "exit_code": exc.code}, compact=True)
        else:
            print(f"sdr {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # pragma: no cover
        if args.json:
            out.emit({"error": f"{type(exc).__name__}: {exc}", "exit_code": 1}, compact=True)
        else:
            print(f"sdr {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
