#!/usr/bin/env python3
"""Download MNIST and Olivetti Faces into the CSV layout read by `photomesh train`.

Writes data/mnist.csv (784 raw pixels, 0-255) and data/olivetti.csv
(64x64 faces averaged down to 32x32, values in [0, 1]). Both files start
with a `label,f0,f1,...` header. Requires scikit-learn and network access.
"""

import argparse
import pathlib

import numpy as np
from sklearn.datasets import fetch_olivetti_faces, fetch_openml


def write_csv(path, labels, features, fmt):
    header = "label," + ",".join(f"f{i}" for i in range(features.shape[1]))
    rows = np.column_stack([labels.astype(np.int64), features])
    np.savetxt(path, rows, fmt=["%d"] + [fmt] * features.shape[1], delimiter=",", header=header, comments="")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--only", choices=["mnist", "olivetti"], help="fetch a single dataset")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.only in (None, "mnist"):
        mnist = fetch_openml("mnist_784", version=1, as_frame=False, parser="liac-arff")
        write_csv(out / "mnist.csv", mnist.target.astype(int), mnist.data.astype(np.int64), "%d")
        print(f"wrote {out / 'mnist.csv'}: {mnist.data.shape[0]} samples")

    if args.only in (None, "olivetti"):
        faces = fetch_olivetti_faces()
        small = faces.images.reshape(-1, 32, 2, 32, 2).mean(axis=(2, 4)).reshape(-1, 1024)
        write_csv(out / "olivetti.csv", faces.target, small, "%.6f")
        print(f"wrote {out / 'olivetti.csv'}: {small.shape[0]} samples")


if __name__ == "__main__":
    main()
