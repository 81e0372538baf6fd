"""Rasterize the synthetic silhouettes into fixtures/silhouettes/*.pgm."""

import argparse
from pathlib import Path

from sdr.imaging import write_pgm
from sdr.shapes import SILHOUETTES, rasterize

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--out", type=Path, default=ROOT / "fixtures" / "silhouettes")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, make in SILHOUETTES.items():
        path = args.out / f"{name}.pgm"
        write_pgm(path, rasterize(make(), args.size))
        print(path)


if __name__ == "__main__":
    main()
