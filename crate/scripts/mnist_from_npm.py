#!/usr/bin/env python3
"""Convert the digits shipped in the `mnist` npm package (cazala/mnist) into
gzipped IDX files readable by `silo::data::load_mnist_idx`.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist

The package stores 10,000 MNIST digits grouped by label with pixels scaled to
[0,1]. Records are interleaved with a fixed permutation so that any prefix of
the output is a class-balanced random subset.
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    records = []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for i in range(0, len(data), 784):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in data[i : i + 784])
            records.append((digit, pixels))

    random.Random(20240229).shuffle(records)
    n = len(records)
    dst.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(dst / "digits10k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for _, pixels in records:
            f.write(pixels)
    with gzip.GzipFile(dst / "digits10k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(label for label, _ in records))
    print(f"wrote {n} records to {dst}")


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
