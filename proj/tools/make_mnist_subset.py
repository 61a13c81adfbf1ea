#!/usr/bin/env python3
# Copyright 2026 The splitfss Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Builds the small MNIST train/test split used by the tests and benchmarks.

Input is the 5,000-image MNIST sample shipped as mnist_5k.csv.gz (784 pixel
columns followed by the label), either as the .csv.gz itself or inside a
wheel that contains it. Output is four IDX files in the usual MNIST names.
"""

import argparse
import csv
import gzip
import io
import random
import struct
import sys
import zipfile
from pathlib import Path

CSV_MEMBER = "mnist_5k.csv.gz"


def read_rows(source: Path):
    if source.suffix in (".whl", ".zip"):
        with zipfile.ZipFile(source) as z:
            name = next(n for n in z.namelist() if n.endswith(CSV_MEMBER))
            raw = z.read(name)
    else:
        raw = source.read_bytes()
    text = gzip.decompress(raw).decode("ascii")
    rows = []
    for rec in csv.reader(io.StringIO(text)):
        values = [int(float(v)) for v in rec]
        rows.append((bytes(values[:784]), values[784]))
    return rows


def write_images(path: Path, rows):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(pixels)


def write_labels(path: Path, rows):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(rows)))
        f.write(bytes(label for _, label in rows))


def main(argv):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("source", type=Path, help="mnist_5k.csv.gz or a wheel containing it")
    p.add_argument("--out", type=Path, default=Path("data/mnist-subset"))
    p.add_argument("--train", type=int, default=4000)
    p.add_argument("--test", type=int, default=1000)
    p.add_argument("--seed", type=int, default=2026)
    args = p.parse_args(argv)

    rows = read_rows(args.source)
    if args.train + args.test > len(rows):
        p.error(f"only {len(rows)} images available")
    random.Random(args.seed).shuffle(rows)
    args.out.mkdir(parents=True, exist_ok=True)
    train = rows[: args.train]
    test = rows[args.train : args.train + args.test]
    write_images(args.out / "train-images-idx3-ubyte", train)
    write_labels(args.out / "train-labels-idx1-ubyte", train)
    write_images(args.out / "t10k-images-idx3-ubyte", test)
    write_labels(args.out / "t10k-labels-idx1-ubyte", test)
    print(f"wrote {len(train)} train and {len(test)} test images to {args.out}")


if __name__ == "__main__":
    main(sys.argv[1:])
