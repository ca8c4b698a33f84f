"""Convert the per-digit JSON files of the npm ``mnist`` package into IDX archives.

The package ships ~1000 real MNIST digits per class as 784 floats rounded to
three decimals, which is fine enough to recover every original byte exactly.
Each class is split in half: first half -> train files, second half -> t10k.

    npm pack mnist && tar xzf mnist-*.tgz
    python scripts/json_digits_to_idx.py package/src/digits data/mnist
"""
import argparse
import gzip
import json
from pathlib import Path

import numpy as np

from qmoe.data import encode_idx_images, encode_idx_labels


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("digits_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args()

    splits = {"train": ([], []), "t10k": ([], [])}
    for digit in range(10):
        values = np.asarray(json.loads((args.digits_dir / f"{digit}.json").read_text())["data"])
        images = np.rint(values * 255).astype(np.uint8).reshape(-1, 28, 28)
        if np.abs(images / 255 - values.reshape(images.shape)).max() > 5e-4:
            raise SystemExit(f"digit {digit}: values are not 3-decimal renderings of bytes")
        half = images.shape[0] // 2
        for split, chunk in (("train", images[:half]), ("t10k", images[half:])):
            splits[split][0].append(chunk)
            splits[split][1].append(np.full(chunk.shape[0], digit, dtype=np.uint8))

    args.out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)
    for split, (imgs, labs) in splits.items():
        imgs = np.concatenate(imgs)
        labs = np.concatenate(labs)
        perm = rng.permutation(labs.shape[0])
        for name, blob in ((f"{split}-images-idx3-ubyte.gz", encode_idx_images(imgs[perm])),
                           (f"{split}-labels-idx1-ubyte.gz", encode_idx_labels(labs[perm]))):
            # mtime=0 keeps the archives byte-reproducible
            (args.out_dir / name).write_bytes(gzip.compress(blob, mtime=0))
        print(f"{split}: {labs.shape[0]} images, per class {np.bincount(labs).tolist()}")


if __name__ == "__main__":
    main()
