#!/usr/bin/env python3
"""Regenerate the three headline cost curves as CSV files.

  cost_vs_databases.csv   K=10, mu=1/2, N = 0..30
  cost_vs_storage.csv     K=10, N=5, mu on a 21-point grid
  central_vs_decentral.csv  K=10, N=5: coordinated-placement envelope
                            next to the decentralized formula

Plotting is left to downstream tools; every value is exact.
"""

import argparse
import csv
from fractions import Fraction
from pathlib import Path

from decpir import capacity_decentralized, centralized_envelope


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    print(f"wrote {path}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="figures", type=Path)
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    rows = [
        (n, str(capacity_decentralized(10, n, Fraction(1, 2))),
         float(capacity_decentralized(10, n, Fraction(1, 2))))
        for n in range(31)
    ]
    write_rows(args.out_dir / "cost_vs_databases.csv", ["n", "cost", "cost_float"], rows)

    rows = []
    for i in range(21):
        mu = Fraction(i, 20)
        cost = capacity_decentralized(10, 5, mu)
        rows.append((str(mu), str(cost), float(cost)))
    write_rows(args.out_dir / "cost_vs_storage.csv", ["mu", "cost", "cost_float"], rows)

    env = centralized_envelope(10, 5)
    rows = []
    for i in range(101):
        mu = Fraction(i, 100)
        decentralized = capacity_decentralized(10, 5, mu)
        centralized = env.evaluate(mu)
        rows.append((str(mu), float(centralized), float(decentralized)))
    write_rows(
        args.out_dir / "central_vs_decentral.csv",
        ["mu", "centralized", "decentralized"],
        rows,
    )


if __name__ == "__main__":
    main()
