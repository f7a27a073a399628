"""IDX-format image/label ingestion (the MNIST/EMNIST container).

Big-endian magic plus dimension words, then a uint8 payload.  Only the
two magics those distributions use are accepted: 0x00000803 (rank-3
images) and 0x00000801 (rank-1 labels).  Files ending in .gz are
decompressed transparently.
"""

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


def parse_idx(data):
    """Decode an IDX byte stream into a uint8 array of the declared shape."""
    if len(data) < 4:
        raise DataError("IDX stream truncated in the magic at offset 0")
    magic = int.from_bytes(data[:4], "big")
    if magic == IMAGE_MAGIC:
        ndim = 3
    elif magic == LABEL_MAGIC:
        ndim = 1
    else:
        raise DataError(f"unsupported IDX magic 0x{magic:08x} at offset 0")
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise DataError(f"IDX stream truncated in the dimensions at offset {len(data)}")
    dims = struct.unpack(">" + "I" * ndim, data[4:header_end])
    count = 1
    for d in dims:
        count *= d
    if len(data) < header_end + count:
        raise DataError(
            f"IDX payload truncated at offset {len(data)}, "
            f"expected {header_end + count} bytes"
        )
    if len(data) > header_end + count:
        raise DataError(f"trailing bytes at offset {header_end + count}")
    return np.frombuffer(data, dtype=np.uint8, offset=header_end).reshape(dims).copy()


def to_idx_bytes(arr):
    """Serialize a uint8 array of rank 1 or 3 back to IDX bytes."""
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise ValueError("to_idx_bytes expects uint8 data")
    if arr.ndim == 3:
        magic = IMAGE_MAGIC
    elif arr.ndim == 1:
        magic = LABEL_MAGIC
    else:
        raise ValueError("to_idx_bytes expects rank 1 or rank 3")
    header = magic.to_bytes(4, "big") + struct.pack(
        ">" + "I" * arr.ndim, *arr.shape
    )
    return header + arr.tobytes()


def read_idx_file(path):
    """parse_idx on a file, gunzipping when the name ends in .gz."""
    opener = gzip.open if str(path).endswith(".gz") else open
    try:
        with opener(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return parse_idx(data)


@dataclass
class Dataset:
    """Flattened [0,1] images, one-hot labels, and the raw label vector."""

    x: np.ndarray
    y_onehot: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.x.shape[0]


def load_dataset(images_path, labels_path, n_classes, labels_start_at_one=False):
    """Read an image/label file pair into a Dataset.

    Pixels are scaled by 1/255; labels one-hot encoded against n_classes.
    labels_start_at_one shifts 1-indexed labels (EMNIST letters) down.
    """
    images = read_idx_file(images_path)
    labels = read_idx_file(labels_path)
    if images.ndim != 3:
        raise DataError(f"{images_path} does not hold rank-3 image data")
    if labels.ndim != 1:
        raise DataError(f"{labels_path} does not hold rank-1 label data")
    if images.shape[0] != labels.shape[0]:
        raise DataError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    labels = labels.astype(np.int64)
    if labels_start_at_one:
        labels = labels - 1
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(
            f"label outside [0, {n_classes}): range "
            f"[{labels.min()}, {labels.max()}]"
        )
    n = images.shape[0]
    x = images.reshape(n, -1).astype(float) / 255.0
    y = np.zeros((n, n_classes))
    y[np.arange(n), labels] = 1.0
    return Dataset(x=x, y_onehot=y, labels=labels)


def subset(ds, size, seed):
    """Uniform without-replacement subsample, reproducible from the seed."""
    if size > len(ds):
        raise ValueError(f"subset of {size} from {len(ds)} observations")
    rng = np.random.Generator(np.random.Philox(seed))
    idx = np.sort(rng.choice(len(ds), size=size, replace=False))
    return Dataset(x=ds.x[idx], y_onehot=ds.y_onehot[idx], labels=ds.labels[idx])
