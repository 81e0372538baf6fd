"""Dot count and epsilon per fixture image across a range of atom budgets."""

import argparse
from pathlib import Path

from sdr.generalization import BudgetError
from sdr.pipeline import Config, encode_file

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--images", type=Path, default=ROOT / "fixtures" / "silhouettes")
    ap.add_argument("--budgets", type=int, nargs="+", default=[9, 12, 15, 21, 30])
    args = ap.parse_args()
    images = sorted(p for p in args.images.iterdir() if p.suffix in (".pgm", ".png"))
    print("image".ljust(14) + "".join(f"{b:>12}" for b in args.budgets))
    for path in images:
        cells = []
        for b in args.budgets:
            try:
                cloud = encode_file(path, Config(budget=b))
                cells.append(f"{len(cloud)}@{cloud.epsilon:.1f}")
            except BudgetError:
                cells.append("over")
        print(path.stem.ljust(14) + "".join(f"{c:>12}" for c in cells))


if __name__ == "__main__":
    main()
