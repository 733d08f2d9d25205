#!/usr/bin/env python3
# Copyright (c) 2026 The recollect Authors
# SPDX-License-Identifier: Apache-2.0
"""Builds IDX files from the 5000-image MNIST sample bundled with mlxtend.

The sample ships as a CSV (784 pixel columns, label last) sorted by class.
Rows are shuffled with a fixed seed and split into 4000 train / 1000 test
images, written in the standard IDX layout the C++ loader reads.

    python3 tools/fetch_mnist_subset.py [--wheel path.whl] [--out data/mnist]
"""
import argparse
import glob
import gzip
import os
import struct
import subprocess
import tempfile
import zipfile

import numpy as np

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def find_wheel(explicit):
    if explicit:
        return explicit
    tmp = tempfile.mkdtemp()
    subprocess.check_call(["pip", "download", "--no-deps", "-q", "-d", tmp, "mlxtend"])
    return glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel")
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    ap.add_argument("--train", type=int, default=4000)
    args = ap.parse_args()

    raw = zipfile.ZipFile(find_wheel(args.wheel)).read(MEMBER)
    table = np.loadtxt(gzip.decompress(raw).decode().splitlines(), delimiter=",")
    order = np.random.default_rng(0).permutation(len(table))
    table = table[order]
    x, y = table[:, :-1], table[:, -1]

    os.makedirs(args.out, exist_ok=True)
    n = args.train
    write_images(os.path.join(args.out, "train-images-idx3-ubyte"), x[:n])
    write_labels(os.path.join(args.out, "train-labels-idx1-ubyte"), y[:n])
    write_images(os.path.join(args.out, "t10k-images-idx3-ubyte"), x[n:])
    write_labels(os.path.join(args.out, "t10k-labels-idx1-ubyte"), y[n:])
    print(f"wrote {n} train / {len(x) - n} test images to {args.out}")


if __name__ == "__main__":
    main()
