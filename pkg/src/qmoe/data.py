"""Dataset ingestion: IDX parsing, 8x8 box resampling, benchmark subsets, synthetic blobs."""
from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
IMAGE_SIDE = 28
OUT_SIDE = 8
N_FEATURES = OUT_SIDE * OUT_SIDE

DATA_DIR_ENV = "QMOE_DATA_DIR"

# benchmark -> (corpus, raw labels kept, in remapped order)
BENCHMARKS = {
    "MNIST-4": ("mnist", (0, 1, 2, 3)),
    "MNIST-2": ("mnist", (3, 6)),
    "Fashion-4": ("fashion-mnist", (0, 1, 2, 3)),  # t-shirt/top, trouser, pullover, dress
    "Fashion-2": ("fashion-mnist", (3, 6)),  # dress, shirt
}

CORPUS_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class RawImages:
    images: np.ndarray  # (n, 28, 28) uint8
    labels: np.ndarray  # (n,) uint8
    corpus: str | None = None

    def __len__(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: int


@dataclass
class Dataset:
    features: np.ndarray  # (n, 64) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64 in [0, n_classes)
    n_classes: int
    provenance: str = "Synthetic"
    benchmark: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64).reshape(-1, N_FEATURES)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataError(f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DataError(f"labels outside [0, {self.n_classes})")
        if self.features.size and not np.all((self.features >= 0) & (self.features <= 1)):
            raise DataError("features outside [0, 1]")

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.features[i], int(self.labels[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def _maybe_gunzip(blob: bytes) -> bytes:
    if blob[:2] == b"\x1f\x8b":
        return gzip.decompress(blob)
    return blob


def _header(blob: bytes, magic: int, n_dims: int, what: str) -> tuple[int, ...]:
    head = 4 + 4 * n_dims
    if len(blob) < head:
        raise ParseError(f"{what} file truncated inside the header", len(blob))
    if blob[0] != 0 or blob[1] != 0:
        raise ParseError(f"{what} magic must start with two zero bytes", 0 if blob[0] else 1)
    if blob[2] != 0x08:
        raise ParseError(f"{what} element type 0x{blob[2]:02x} is not unsigned byte", 2)
    (found,) = struct.unpack_from(">I", blob, 0)
    if found != magic:
        raise ParseError(f"{what} magic 0x{found:08x} != 0x{magic:08x}", 3)
    return struct.unpack_from(f">{n_dims}I", blob, 4)


def parse_idx(images_bytes: bytes, labels_bytes: bytes, corpus: str | None = None) -> RawImages:
    """Parse an IDX image/label pair of 28x28 unsigned-byte images.

    gzip-compressed input is detected and decompressed. The header must
    agree exactly with the payload length; trailing bytes are rejected.
    """
    images_bytes = _maybe_gunzip(bytes(images_bytes))
    labels_bytes = _maybe_gunzip(bytes(labels_bytes))

    n_img, rows, cols = _header(images_bytes, IMAGES_MAGIC, 3, "images")
    if rows != IMAGE_SIDE:
        raise ParseError(f"images have {rows} rows, expected {IMAGE_SIDE}", 8)
    if cols != IMAGE_SIDE:
        raise ParseError(f"images have {cols} columns, expected {IMAGE_SIDE}", 12)
    expected = 16 + n_img * rows * cols
    if len(images_bytes) != expected:
        raise ParseError(f"images payload holds {len(images_bytes) - 16} bytes, header announces "
                         f"{n_img} x {rows} x {cols}", min(len(images_bytes), expected))

    (n_lab,) = _header(labels_bytes, LABELS_MAGIC, 1, "labels")
    if len(labels_bytes) != 8 + n_lab:
        raise ParseError(f"labels payload holds {len(labels_bytes) - 8} bytes, header announces {n_lab}",
                         min(len(labels_bytes), 8 + n_lab))
    if n_lab != n_img:
        raise ParseError(f"{n_img} images but {n_lab} labels", 4)

    images = np.frombuffer(images_bytes, dtype=np.uint8, offset=16).reshape(n_img, rows, cols).copy()
    labels = np.frombuffer(labels_bytes, dtype=np.uint8, offset=8).copy()
    return RawImages(images, labels, corpus)


def encode_idx_images(images) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols) + images.tobytes()


def encode_idx_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABELS_MAGIC, labels.shape[0]) + labels.tobytes()


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (directory / name).is_file():
            return directory / name
    raise DataError(f"{stem}[.gz] not found in {directory}")


def corpus_dir(data_dir: str | os.PathLike | None, corpus: str) -> Path:
    """``<data_dir>/<corpus>`` if it exists, else ``data_dir`` itself."""
    if data_dir is None:
        data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir is None:
        raise DataError(f"no data directory given and ${DATA_DIR_ENV} unset")
    base = Path(data_dir)
    return base / corpus if (base / corpus).is_dir() else base


def load_corpus(data_dir: str | os.PathLike | None, corpus: str) -> tuple[RawImages, RawImages]:
    directory = corpus_dir(data_dir, corpus)
    out = []
    for split in ("train", "test"):
        img, lab = (_find(directory, s) for s in CORPUS_FILES[split])
        out.append(parse_idx(img.read_bytes(), lab.read_bytes(), corpus))
    return out[0], out[1]


def _box_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row r holds the overlap of input cells with output cell r, normalised to sum 1."""
    scale = n_in / n_out
    edges_lo = np.arange(n_out)[:, None] * scale
    edges_hi = edges_lo + scale
    cells = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(edges_hi, cells + 1) - np.maximum(edges_lo, cells), 0.0, None)
    return overlap / scale


_W = _box_weights(IMAGE_SIDE, OUT_SIDE)


def resize_8x8(image) -> np.ndarray:
    """Area-average a 28x28 image down to 8x8, scale to [0, 1], flatten row-major."""
    img = np.asarray(image, dtype=np.float64)
    if img.shape != (IMAGE_SIDE, IMAGE_SIDE):
        raise DataError(f"expected a {IMAGE_SIDE}x{IMAGE_SIDE} image, got {img.shape}")
    out = _W @ img @ _W.T / 255.0
    return np.clip(out, 0.0, 1.0).reshape(-1)


def resize_batch(images) -> np.ndarray:
    imgs = np.asarray(images, dtype=np.float64)
    out = np.einsum("ri,nij,cj->nrc", _W, imgs, _W, optimize=True) / 255.0
    return np.clip(out, 0.0, 1.0).reshape(imgs.shape[0], -1)


def _select(raw: RawImages, classes: tuple[int, ...], limit: int | None, benchmark: str, split: str) -> Dataset:
    keep = []
    for c in classes:
        idx = np.flatnonzero(raw.labels == c)
        if idx.size == 0:
            raise DataError(f"{benchmark}: class {c} absent from the {split} split")
        keep.append(idx[:limit] if limit is not None else idx)
    order = np.sort(np.concatenate(keep))
    remap = {c: i for i, c in enumerate(classes)}
    labels = np.array([remap[int(v)] for v in raw.labels[order]], dtype=np.int64)
    provenance = "MNIST" if raw.corpus in (None, "mnist") else "FashionMNIST"
    return Dataset(resize_batch(raw.images[order]), labels, len(classes), provenance, benchmark)


def make_benchmark(train_raw: RawImages, test_raw: RawImages, benchmark: str,
                   limit_per_class: int | None = None) -> tuple[Dataset, Dataset]:
    """Class subset, label remap (listed order) and 8x8 features for one benchmark.

    ``limit_per_class`` keeps the first occurrences of each class in corpus
    order.
    """
    if benchmark not in BENCHMARKS:
        raise DataError(f"unknown benchmark {benchmark!r}; expected one of {sorted(BENCHMARKS)}")
    corpus, classes = BENCHMARKS[benchmark]
    for raw in (train_raw, test_raw):
        if raw.corpus is not None and raw.corpus != corpus:
            raise DataError(f"{benchmark} needs the {corpus} corpus, got {raw.corpus}")
    if limit_per_class is not None and limit_per_class < 1:
        raise DataError("limit_per_class must be positive")
    return (_select(train_raw, classes, limit_per_class, benchmark, "train"),
            _select(test_raw, classes, limit_per_class, benchmark, "test"))


def load_benchmark(data_dir, benchmark: str, limit_per_class: int | None = None) -> tuple[Dataset, Dataset]:
    if benchmark not in BENCHMARKS:
        raise DataError(f"unknown benchmark {benchmark!r}; expected one of {sorted(BENCHMARKS)}")
    train_raw, test_raw = load_corpus(data_dir, BENCHMARKS[benchmark][0])
    return make_benchmark(train_raw, test_raw, benchmark, limit_per_class)


def synthetic_blobs(seed: int, n_per_class: int, n_classes: int, sigma: float = 0.1,
                    train_fraction: float = 0.8) -> tuple[Dataset, Dataset]:
    """Seeded Gaussian blobs in the 64-dim feature cube.

    Each class gets a random mean pattern in [0.1, 0.9]^64; samples add
    isotropic noise of width ``sigma`` and are clipped to [0, 1]. The first
    ``train_fraction`` of every class goes to the training set.
    """
    if not 1 <= n_classes <= 8:
        raise DataError(f"synthetic_blobs supports 1..8 classes, got {n_classes}")
    if n_per_class < 2:
        raise DataError("need at least two samples per class for a train/test split")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.1, 0.9, size=(n_classes, N_FEATURES))
    n_train = int(round(train_fraction * n_per_class))
    parts = {"train": ([], []), "test": ([], [])}
    for c in range(n_classes):
        x = np.clip(means[c] + sigma * rng.standard_normal((n_per_class, N_FEATURES)), 0.0, 1.0)
        parts["train"][0].append(x[:n_train])
        parts["train"][1].append(np.full(n_train, c))
        parts["test"][0].append(x[n_train:])
        parts["test"][1].append(np.full(n_per_class - n_train, c))
    tag = f"blobs-{n_classes}"
    out = []
    for split in ("train", "test"):
        x = np.concatenate(parts[split][0])
        y = np.concatenate(parts[split][1])
        # interleave classes so corpus order is not sorted by label
        perm = rng.permutation(y.shape[0])
        out.append(Dataset(x[perm], y[perm], n_classes, "Synthetic", tag))
    return out[0], out[1]
