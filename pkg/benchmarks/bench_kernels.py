#!/usr/bin/env python3
"""Compare the compiled and pure NumPy convolution backends.

Usage: python benchmarks/bench_kernels.py [--image-size 64] [--batch 16]
(equivalently: `rallycast bench`).
"""

import argparse

from rallycast.nn.kernels import BACKEND
from rallycast.nn.kernels.bench import format_rows, run


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--image-size", type=int, default=64)
    parser.add_argument("--batch", type=int, default=16)
    args = parser.parse_args()
    print(f"active backend: {BACKEND}")
    for size in sorted({args.image_size, 32}):
        rows = run(image_size=size, batch=args.batch)
        print(format_rows(rows, size, args.batch))
        print()


if __name__ == "__main__":
    main()
