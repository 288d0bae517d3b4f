#!/usr/bin/env python3
"""Download MNIST and convert it to the UQD1 image-container format.

Writes data/mnist_train.uqd and data/mnist_test.uqd (70k 1x28x28 images,
labels 0-9) next to the repository root, which is where the shipped configs
and the acceptance suite look for them.

Usage:
    python3 tools/fetch_mnist.py [--out DIR]
"""

import argparse
import gzip
import pathlib
import struct
import sys
import urllib.error
import urllib.request

MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "http://yann.lecun.com/exdb/mnist/",
]

FILES = {
    "train": ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"),
    "test": ("t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"),
}


def download(name: str, cache: pathlib.Path) -> bytes:
    target = cache / name
    if target.exists():
        return target.read_bytes()
    last_error = None
    for mirror in MIRRORS:
        url = mirror + name
        try:
            print(f"downloading {url}")
            with urllib.request.urlopen(url, timeout=60) as resp:
                blob = resp.read()
            target.write_bytes(blob)
            return blob
        except (urllib.error.URLError, OSError, TimeoutError) as e:
            last_error = e
            print(f"  failed: {e}", file=sys.stderr)
    raise SystemExit(
        f"could not download {name} from any mirror (last error: {last_error}); "
        "if this machine has no network access, fetch the four MNIST .gz files "
        f"manually into {cache}/ and re-run"
    )


def parse_idx_images(blob: bytes) -> tuple[int, int, int, bytes]:
    magic, count, rows, cols = struct.unpack(">IIII", blob[:16])
    if magic != 2051:
        raise SystemExit(f"bad image magic {magic}")
    pixels = blob[16:]
    if len(pixels) != count * rows * cols:
        raise SystemExit("truncated image file")
    return count, rows, cols, pixels


def parse_idx_labels(blob: bytes) -> bytes:
    magic, count = struct.unpack(">II", blob[:8])
    if magic != 2049:
        raise SystemExit(f"bad label magic {magic}")
    labels = blob[8:]
    if len(labels) != count:
        raise SystemExit("truncated label file")
    return labels


def write_container(path: pathlib.Path, count: int, rows: int, cols: int,
                    labels: bytes, pixels: bytes) -> None:
    with open(path, "wb") as f:
        f.write(b"UQD1")
        f.write(struct.pack("<IIIII", count, 1, rows, cols, 10))
        f.write(struct.pack(f"<{count}i", *labels))
        f.write(pixels)  # already one byte per pixel, row-major
    print(f"wrote {path} ({count} images, 1x{rows}x{cols})")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=None,
                    help="output directory (default: <repo>/data)")
    args = ap.parse_args()

    repo = pathlib.Path(__file__).resolve().parent.parent
    out = pathlib.Path(args.out) if args.out else repo / "data"
    out.mkdir(parents=True, exist_ok=True)

    for split, (image_file, label_file) in FILES.items():
        count, rows, cols, pixels = parse_idx_images(
            gzip.decompress(download(image_file, out)))
        labels = parse_idx_labels(gzip.decompress(download(label_file, out)))
        if len(labels) != count:
            raise SystemExit(f"{split}: image/label count mismatch")
        write_container(out / f"mnist_{split}.uqd", count, rows, cols, labels,
                        pixels)


if __name__ == "__main__":
    main()
