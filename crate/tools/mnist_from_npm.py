#!/usr/bin/env python3
"""Convert the 10,000 MNIST digits bundled in the npm `mnist` package (MIT,
Juan Cazala) into gzip-compressed IDX files.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_from_npm.py package/src/digits data/mnist-10k

The package stores pixels as round(byte / 255, 3); multiplying by 255 and
rounding recovers the original bytes exactly.
"""
import gzip
import json
import struct
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    images = bytearray()
    labels = bytearray()
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for v in data:
            b = round(v * 255)
            assert 0 <= b <= 255
            images.append(b)
        labels.extend([digit] * (len(data) // 784))
    n = len(labels)
    dst.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(dst / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, n, 28, 28))
        f.write(bytes(images))
    with gzip.GzipFile(dst / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, n))
        f.write(bytes(labels))
    print(f"wrote {n} examples to {dst}")


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
