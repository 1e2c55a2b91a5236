"""Synthetic dataset generators, IDX ingestion, and OOD split construction.

Generators are pure functions of (seed, params): the same seed yields a
bit-identical dataset. IDX files may be raw or gzip-compressed; the file
paths come from the caller, never from the network.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_CUBIC = (0.0, 2.0, -3.0, 1.0)  # f(x) = x^3 - 3x^2 + 2x, low order first

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Malformed IDX container."""


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError(
                f"inputs/targets length mismatch: {len(self.inputs)} vs "
                f"{len(self.targets)}"
            )

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.inputs.shape[1:]))


@dataclass
class OodSplit:
    in_distribution: Dataset
    out_of_distribution: Dataset


def cubic(x: np.ndarray, coefficients=DEFAULT_CUBIC) -> np.ndarray:
    out = np.zeros_like(x)
    for power, c in enumerate(coefficients):
        out += c * x ** power
    return out


def default_noise_std(coefficients=DEFAULT_CUBIC, lo=-1.0, hi=3.0) -> float:
    """0.3 times the std of f over [lo, hi], by dense deterministic quadrature."""
    grid = np.linspace(lo, hi, 20001)
    return 0.3 * float(cubic(grid, coefficients).std())


def toy_regression(n: int, seed: int, noise_std: float | None = None,
                   coefficients=DEFAULT_CUBIC, lo: float = -1.0,
                   hi: float = 3.0) -> Dataset:
    """x uniform on [lo, hi]; y = cubic(x) + Gaussian(0, noise_std)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if noise_std is None:
        noise_std = default_noise_std(coefficients, lo, hi)
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=n)
    y = cubic(x, coefficients) + rng.normal(0.0, noise_std, size=n) if noise_std \
        else cubic(x, coefficients)
    return Dataset(
        inputs=x.reshape(-1, 1),
        targets=np.asarray(y, dtype=np.float64),
        metadata={
            "name": "toy_regression", "input_dim": 1, "target_dim": 1,
            "seed": seed, "n": n, "noise_std": noise_std,
            "coefficients": tuple(coefficients), "lo": lo, "hi": hi,
        },
    )


def toy_classification(n: int, seed: int, means=((-1.0, -1.0), (1.0, 1.0)),
                       std: float = 0.35) -> Dataset:
    """Two balanced isotropic Gaussian clusters in the plane, labels 0/1."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    rng = np.random.default_rng(seed)
    n0 = n // 2
    n1 = n - n0
    pts0 = rng.normal(means[0], std, size=(n0, 2))
    pts1 = rng.normal(means[1], std, size=(n1, 2))
    inputs = np.vstack([pts0, pts1])
    targets = np.concatenate([np.zeros(n0, dtype=np.int64),
                              np.ones(n1, dtype=np.int64)])
    order = rng.permutation(n)
    return Dataset(
        inputs=inputs[order],
        targets=targets[order],
        metadata={
            "name": "toy_classification", "input_dim": 2, "target_dim": 2,
            "seed": seed, "n": n, "means": tuple(map(tuple, means)), "std": std,
        },
    )


def ood_interval(lo: float, hi: float, n: int) -> np.ndarray:
    """Evenly spaced scalar probe points, shaped (n, 1)."""
    return np.linspace(lo, hi, n).reshape(-1, 1)


def ood_grid(x_range, y_range, resolution: int) -> np.ndarray:
    """All points of a resolution x resolution grid over the given ranges."""
    xs = np.linspace(x_range[0], x_range[1], resolution)
    ys = np.linspace(y_range[0], y_range[1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


# -- idx ingestion ---------------------------------------------------------

DEFAULT_IDX_FILES = {
    "train_images": "train-images-idx3-ubyte.gz",
    "train_labels": "train-labels-idx1-ubyte.gz",
    "test_images": "t10k-images-idx3-ubyte.gz",
    "test_labels": "t10k-labels-idx1-ubyte.gz",
    "fashion_test_images": "fashion-t10k-images-idx3-ubyte.gz",
    "fashion_test_labels": "fashion-t10k-labels-idx1-ubyte.gz",
}


def resolve_idx_paths(directory, require_fashion: bool = True) -> dict:
    """Locate the IDX files (gzipped or raw) under a data directory."""
    directory = Path(directory)
    found = {}
    missing = []
    for key, name in DEFAULT_IDX_FILES.items():
        if not require_fashion and key.startswith("fashion"):
            continue
        candidates = [directory / name, directory / name.removesuffix(".gz")]
        path = next((c for c in candidates if c.exists()), None)
        if path is None:
            missing.append(name)
        else:
            found[key] = path
    if missing:
        raise FileNotFoundError(
            f"missing IDX files under {directory}: {', '.join(missing)} "
            f"(fetch them out of band; see README)"
        )
    return found


def _read_idx_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_idx(raw: bytes, path, expect_magic: int, n_dims: int):
    if len(raw) < 4 * (1 + n_dims):
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expect_magic:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08x} at offset 0 "
            f"(expected 0x{expect_magic:08x})"
        )
    dims = struct.unpack(f">{n_dims}I", raw[4:4 + 4 * n_dims])
    payload = raw[4 + 4 * n_dims:]
    expected = int(np.prod(dims))
    if len(payload) != expected:
        raise IdxFormatError(
            f"{path}: payload holds {len(payload)} bytes, dims {dims} "
            f"require {expected}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path, flatten: bool = True) -> Dataset:
    """Parse an IDX image/label pair; pixels scaled to [0, 1].

    ``flatten=False`` keeps images as (n, 1, h, w) for conv models.
    """
    images = _parse_idx(_read_idx_bytes(images_path), images_path,
                        IDX_IMAGES_MAGIC, 3)
    labels = _parse_idx(_read_idx_bytes(labels_path), labels_path,
                        IDX_LABELS_MAGIC, 1)
    if len(images) != len(labels):
        raise IdxFormatError(
            f"image count {len(images)} != label count {len(labels)}"
        )
    pixels = images.astype(np.float64) / 255.0
    n, h, w = pixels.shape
    inputs = pixels.reshape(n, h * w) if flatten else pixels.reshape(n, 1, h, w)
    return Dataset(
        inputs=inputs,
        targets=labels.astype(np.int64),
        metadata={"name": str(images_path), "input_dim": h * w, "target_dim": 10,
                  "n": n, "height": h, "width": w},
    )


def make_ood_split(kind: str, paths: dict, flatten: bool = True) -> OodSplit:
    """Build the image OOD protocols.

    ``mnist_vs_fashion`` wants paths: test_images, test_labels,
    fashion_test_images, fashion_test_labels. ``split_mnist`` wants
    test_images, test_labels and keeps digits 0-4 in-distribution (labels
    already fit a 5-class head) with 5-9 as OOD.
    """
    if kind == "mnist_vs_fashion":
        ood = load_idx(paths["fashion_test_images"],
                       paths["fashion_test_labels"], flatten)
        ind = load_idx(paths["test_images"], paths["test_labels"], flatten)
        ind.metadata["name"] = "mnist_test"
        ood.metadata["name"] = "fashion_test"
        return OodSplit(ind, ood)
    if kind == "split_mnist":
        full = load_idx(paths["test_images"], paths["test_labels"], flatten)
        low = full.targets <= 4
        ind = Dataset(full.inputs[low], full.targets[low],
                      {**full.metadata, "name": "mnist_digits_0_4",
                       "target_dim": 5})
        ood = Dataset(full.inputs[~low], full.targets[~low],
                      {**full.metadata, "name": "mnist_digits_5_9"})
        return OodSplit(ind, ood)
    raise ValueError(
        f"unknown ood split kind {kind!r}; valid: mnist_vs_fashion, split_mnist"
    )


def split_digits(dataset: Dataset, max_digit: int = 4) -> Dataset:
    """Restrict an image dataset to digits <= max_digit (for split training)."""
    keep = dataset.targets <= max_digit
    return Dataset(dataset.inputs[keep], dataset.targets[keep],
                   {**dataset.metadata, "name": f"digits_0_{max_digit}",
                    "target_dim": max_digit + 1})


# -- dataset cache -----------------------------------------------------------

def save_dataset(dataset: Dataset, path) -> None:
    """CSV of feature columns + target, with a key=value metadata sidecar."""
    path = Path(path)
    flat = dataset.inputs.reshape(len(dataset), -1)
    header = ",".join([f"x{i}" for i in range(flat.shape[1])] + ["target"])
    lines = [header]
    for row, target in zip(flat, dataset.targets):
        cells = [repr(float(v)) for v in row]
        cells.append(repr(target.item()))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = dict(dataset.metadata)
    meta["targets_dtype"] = dataset.targets.dtype.name
    meta_lines = [f"{k}={v!r}" for k, v in sorted(meta.items())]
    path.with_suffix(path.suffix + ".meta").write_text(
        "\n".join(meta_lines) + "\n", encoding="utf-8")


def load_dataset(path) -> Dataset:
    import ast

    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    n_features = len(lines[0].split(",")) - 1
    inputs, targets = [], []
    for line in lines[1:]:
        cells = line.split(",")
        inputs.append([float(c) for c in cells[:n_features]])
        targets.append(float(cells[-1]))
    metadata = {}
    meta_path = path.with_suffix(path.suffix + ".meta")
    if meta_path.exists():
        for line in meta_path.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition("=")
            metadata[key] = ast.literal_eval(value)
    dtype = metadata.pop("targets_dtype", "float64")
    return Dataset(np.array(inputs), np.array(targets, dtype=dtype), metadata)
