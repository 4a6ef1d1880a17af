#!/usr/bin/env python3
"""Write the 5000-digit MNIST subset bundled with mlxtend as IDX files.

The sandbox this project is developed in has no route to the MNIST mirrors,
but the mlxtend wheel ships 5000 digits (500 per class) drawn from the
original training set. This script extracts them into the standard IDX
layout so the C++ loaders read them like any other MNIST file.

    python3 tools/prepare_mnist_subset.py --out data/mnist5k
    python3 tools/prepare_mnist_subset.py --wheel mlxtend-0.24.0-py3-none-any.whl
"""
import argparse
import glob
import gzip
import os
import struct
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def find_wheel(workdir):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
         "mlxtend==0.24.0", "-d", workdir],
        check=True)
    wheels = glob.glob(os.path.join(workdir, "mlxtend-*.whl"))
    if not wheels:
        sys.exit("pip did not produce an mlxtend wheel")
    return wheels[0]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel", help="path to an mlxtend wheel (downloaded if omitted)")
    ap.add_argument("--out", default="data/mnist5k")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or find_wheel(tmp)
        raw = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER)).decode()

    images, labels = bytearray(), bytearray()
    rows = 0
    for line in raw.splitlines():
        values = [int(float(v)) for v in line.split(",")]
        if len(values) != 785:
            sys.exit(f"unexpected row width {len(values)}")
        images.extend(values[:784])
        labels.append(values[784])
        rows += 1

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, rows, 28, 28))
        f.write(images)
    with open(os.path.join(args.out, "labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x00000801, rows))
        f.write(labels)
    print(f"wrote {rows} digits to {args.out}")


if __name__ == "__main__":
    main()
