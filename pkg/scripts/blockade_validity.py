"""Largest |<n_j>| gap between full and blockade bases as an atom pair is
pulled apart towards the blockade radius, under resonant drive."""

import argparse

import numpy as np

from sdr.embedding import AtomRegister, HardwareProfile, blockade_radius
from sdr.evolution import evolve
from sdr.rydberg import WaveformSet, build_hamiltonian


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=1.0)
    ap.add_argument("--fractions", type=float, nargs="+",
                    default=[0.5, 0.6, 0.7, 0.8, 0.9, 0.99])
    args = ap.parse_args()
    prof = HardwareProfile()
    rb = blockade_radius(prof.c6, prof.omega_max)
    waves = WaveformSet.constant(prof.omega_max, duration=args.duration)
    print(f"R_b = {rb:.3f} um at omega_max")
    print("d/R_b   d (um)   V/Omega     max gap")
    for f in args.fractions:
        d = f * rb
        reg = AtomRegister(np.array([[20.0, 20.0], [20.0 + d, 20.0]]), np.ones(2),
                           prof.replace(min_spacing=1.0))
        full = evolve(build_hamiltonian(reg, waves, "full")).densities
        cut = evolve(build_hamiltonian(reg, waves, "blockade", rb)).densities
        v = prof.c6 / d ** 6
        print(f"{f:5.2f} {d:8.3f} {v / prof.omega_max:9.2f} {np.abs(full - cut).max():11.2e}")


if __name__ == "__main__":
    main()
