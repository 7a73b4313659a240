#!/usr/bin/env python3
"""Dump the scikit-learn digits dataset into the workbench's binary
classification container (u64 n, u64 d, u64 num_classes header, then
row-major f64 features, then u16 labels). Features are scaled to [0, 1].
"""
import argparse
import struct

import numpy as np
from sklearn.datasets import load_digits


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("out", help="output .bin path")
    args = ap.parse_args()

    digits = load_digits()
    x = (digits.data / 16.0).astype("<f8")
    y = digits.target.astype("<u2")
    n, d = x.shape
    with open(args.out, "wb") as f:
        f.write(struct.pack("<QQQ", n, d, int(y.max()) + 1))
        f.write(x.tobytes())
        f.write(y.tobytes())
    print(f"wrote {args.out}: n={n} d={d} classes={int(y.max()) + 1}")


if __name__ == "__main__":
    main()
