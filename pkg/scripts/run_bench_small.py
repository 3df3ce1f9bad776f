#!/usr/bin/env python3
"""Run the small benchmark case: 5x5x5 random complex tensors, approximation
ranks (1,1,2) and (3,3,3), comparing hooi / lmpd / lmpd-s over 20 seeds.

Equivalent to: stiefel-polar bench --case small --out-dir bench-out/small
"""
import sys

from stiefel_polar.cli import main

if __name__ == "__main__":
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "bench-out/small"
    sys.exit(main(["bench", "--case", "small", "--out-dir", out_dir]))
