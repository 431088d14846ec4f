#!/usr/bin/env python3
"""Convert the digit samples bundled with the npm `mnist` package into IDX files.

The package ships 10,000 MNIST digits (1,000 per class) as JSON arrays of
pixel intensities rounded to three decimals. They are re-quantized to uint8,
shuffled with a fixed seed, and written as an 8,000-image training file plus a
2,000-image test file in the standard MNIST IDX layout.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_from_npm.py package/src/digits data/mnist
"""
import argparse
import json
import pathlib
import random
import struct


def write_idx_images(path, images, rows, cols):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), rows, cols))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=8000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    samples = []
    for digit in range(10):
        data = json.load(open(pathlib.Path(args.digits_dir) / f"{digit}.json"))["data"]
        assert len(data) % 784 == 0
        for k in range(len(data) // 784):
            px = data[k * 784:(k + 1) * 784]
            samples.append(([min(255, max(0, round(v * 255))) for v in px], digit))

    random.Random(args.seed).shuffle(samples)
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    splits = {"train": samples[:args.train], "test": samples[args.train:]}
    for name, part in splits.items():
        write_idx_images(out / f"{name}-images-idx3-ubyte", [s[0] for s in part], 28, 28)
        write_idx_labels(out / f"{name}-labels-idx1-ubyte", [s[1] for s in part])
        print(f"{name}: {len(part)} images")


if __name__ == "__main__":
    main()
