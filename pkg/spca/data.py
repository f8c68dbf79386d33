"""Datasets of flattened grayscale images: ingestion, normalization,
occlusion, per-class splits, manifests and PGM export."""

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import linalg

from spca import constants
from spca.errors import (
    DataFormatError,
    DegenerateInputError,
    DimensionMismatchError,
    InvalidArgumentError,
)
from spca.global_random import GlobalRandom
from spca.matrix_io import read_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImageDataset:
    """One image per column, flattened row-major.

    `clean` holds the pristine pixels once a dataset has been occluded;
    `corruption_mask` marks the occluded columns.
    """

    matrix: np.ndarray
    labels: np.ndarray
    height: int
    width: int
    corruption_mask: Optional[np.ndarray] = None
    clean: Optional[np.ndarray] = None
    files: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise InvalidArgumentError(f"matrix must be 2-d, got shape {self.matrix.shape}")
        if self.matrix.shape[0] != self.height * self.width:
            raise DimensionMismatchError(
                f"matrix has d = {self.matrix.shape[0]} rows but the images are "
                f"{self.height}x{self.width}"
            )
        if self.labels.shape != (self.n,):
            raise DimensionMismatchError(f"expected {self.n} labels, got {self.labels.shape[0]}")
        if self.corruption_mask is not None and self.corruption_mask.shape != (self.n,):
            raise DimensionMismatchError("corruption mask length differs from the sample count")
        if self.clean is not None and self.clean.shape != self.matrix.shape:
            raise DimensionMismatchError("clean pixels differ in shape from the matrix")
        if self.files is not None and len(self.files) != self.n:
            raise DimensionMismatchError("file list length differs from the sample count")

    @property
    def n(self):
        return self.matrix.shape[1]

    @property
    def d(self):
        return self.matrix.shape[0]

    @property
    def mask(self):
        """Corruption mask with absent treated as all clean."""
        if self.corruption_mask is None:
            return np.zeros(self.n, dtype=bool)
        return self.corruption_mask

    @property
    def pristine(self):
        return self.matrix if self.clean is None else self.clean

    def subset(self, index):
        index = np.asarray(index, dtype=int)
        return replace(
            self,
            matrix=self.matrix[:, index],
            labels=self.labels[index],
            corruption_mask=None if self.corruption_mask is None else self.corruption_mask[index],
            clean=None if self.clean is None else self.clean[:, index],
            files=None if self.files is None else tuple(self.files[i] for i in index),
        )


def _pgm_maxval(img):
    # tile args are the rawmode alone at maxval 255, otherwise (rawmode, maxval)
    if not img.tile:
        return constants.PGM_MAXVAL
    args = img.tile[0][3]
    if isinstance(args, tuple) and isinstance(args[-1], int):
        return args[-1]
    return constants.PGM_MAXVAL


def _read_pgm(path):
    """Pixels of an 8-bit PGM on [0, 1], dividing by the file's own maxval."""
    try:
        with Image.open(path) as img:
            kind, mode = img.format, img.mode
            maxval = _pgm_maxval(img)
            pixels = np.asarray(img, dtype=float)
    except (UnidentifiedImageError, SyntaxError, ValueError, OSError) as err:
        raise DataFormatError(f"{path}: not a readable PGM image ({err})") from None
    if kind != "PPM" or mode != "L":
        raise DataFormatError(f"{path}: expected an 8-bit grayscale PGM, got {kind} in mode {mode}")
    if maxval == constants.PGM_MAXVAL:
        return pixels / constants.PGM_MAXVAL
    # Pillow stretches smaller maxvals to 255 with rounding; undo it exactly
    return np.rint(pixels * maxval / constants.PGM_MAXVAL) / maxval


def load_image_dir(path):
    """Load one subdirectory per class, both in lexicographic order.

    Pixels are scaled to [0, 1]. Class ids are the subdirectory indices.
    """
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory {root} does not exist")
    classes = sorted(entry for entry in root.iterdir() if entry.is_dir())
    if not classes:
        raise DataFormatError(f"{root}: no class subdirectories found")

    columns, labels, files = [], [], []
    shape = None
    for label, class_dir in enumerate(classes):
        for image_path in sorted(entry for entry in class_dir.iterdir() if entry.is_file()):
            pixels = _read_pgm(image_path)
            if shape is None:
                shape = pixels.shape
            elif pixels.shape != shape:
                raise DataFormatError(
                    f"{image_path}: image is {pixels.shape[0]}x{pixels.shape[1]}, "
                    f"expected {shape[0]}x{shape[1]}"
                )
            columns.append(pixels.ravel())
            labels.append(label)
            files.append(image_path.relative_to(root).as_posix())
    if not columns:
        raise DataFormatError(f"{root}: no images found")

    logger.info("loaded %d images of %dx%d in %d classes from %s", len(columns), *shape, len(classes), root)
    return ImageDataset(
        matrix=np.column_stack(columns),
        labels=np.array(labels, dtype=int),
        height=shape[0],
        width=shape[1],
        files=tuple(files),
    )


def load_matrix_csv(path, height=None, width=None):
    """A CSV DataMatrix as a one-class dataset; images default to d x 1."""
    matrix = read_matrix(path)
    d, n = matrix.shape
    if height is None and width is None:
        height, width = d, 1
    elif height is None or width is None:
        raise InvalidArgumentError("give both height and width or neither")
    return ImageDataset(
        matrix=matrix,
        labels=np.zeros(n, dtype=int),
        height=height,
        width=width,
        files=tuple(f"column_{i:04d}" for i in range(n)),
    )


def make_low_rank(height, width, n, rank, classes=1, seed=constants.SEED):
    """Zero-background rank-`rank` images B c with orthonormal B and standard
    Gaussian coefficients c. Labels are assigned round-robin."""
    d = height * width
    if not 1 <= rank <= d:
        raise InvalidArgumentError(f"rank must lie in [1, d = {d}], got {rank}")
    if n < 2 or classes < 1:
        raise InvalidArgumentError(f"need n >= 2 and classes >= 1, got n = {n}, classes = {classes}")
    rng = GlobalRandom(seed)
    basis, _ = linalg.qr(rng.standard_normal((d, rank)), mode="economic")
    coefficients = rng.standard_normal((rank, n))
    labels = np.arange(n) % classes
    return ImageDataset(
        matrix=basis @ coefficients,
        labels=labels,
        height=height,
        width=width,
        files=tuple(f"class_{labels[i]:02d}/sample_{i:04d}.pgm" for i in range(n)),
    )


def _unit_columns(M, name):
    norms = linalg.norm(M, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateInputError(f"{name} column {zero[0]} has zero norm and cannot be normalized")
    return M / norms


def normalize_samples(ds: ImageDataset):
    """Scale every column (and its pristine copy) to unit l2 norm."""
    clean = None if ds.clean is None else _unit_columns(ds.clean, "clean")
    return replace(ds, matrix=_unit_columns(ds.matrix, "sample"), clean=clean)


def occlude(
    ds: ImageDataset,
    fraction=constants.OCCLUDE_FRACTION,
    side_ratio=constants.SIDE_RATIO,
    fill=constants.FILL,
    seed=constants.SEED,
):
    """Overwrite a random block in floor(fraction * n) randomly chosen images."""
    if not 0 <= fraction <= 1:
        raise InvalidArgumentError(f"fraction must lie in [0, 1], got {fraction}")
    if not 0 < side_ratio <= 1:
        raise InvalidArgumentError(f"side_ratio must lie in (0, 1], got {side_ratio}")
    if fill not in constants.FILL_MODES:
        raise InvalidArgumentError(f"fill must be one of {constants.FILL_MODES}, got {fill!r}")

    count = math.floor(fraction * ds.n + 1e-9)
    block_h = math.floor(ds.height * side_ratio)
    block_w = math.floor(ds.width * side_ratio)
    if count and (block_h == 0 or block_w == 0):
        raise InvalidArgumentError(
            f"side_ratio {side_ratio} gives an empty {block_h}x{block_w} block "
            f"on {ds.height}x{ds.width} images"
        )

    rng = GlobalRandom(seed)
    chosen = np.sort(rng.sample(ds.n, count)) if count else np.array([], dtype=int)
    matrix = ds.matrix.copy()
    for column in chosen:
        top = rng.integers(0, ds.height - block_h + 1)
        left = rng.integers(0, ds.width - block_w + 1)
        image = matrix[:, column].reshape(ds.height, ds.width)
        if fill == "black":
            image[top : top + block_h, left : left + block_w] = 0.0
        else:
            image[top : top + block_h, left : left + block_w] = rng.uniform((block_h, block_w))
        matrix[:, column] = image.ravel()

    mask = ds.mask.copy()
    mask[chosen] = True
    logger.info(
        "occluded %d of %d samples with %dx%d %s blocks (seed %d)",
        count, ds.n, block_h, block_w, fill, seed,
    )
    return replace(ds, matrix=matrix, corruption_mask=mask, clean=ds.pristine.copy())


def split_mask(ds: ImageDataset, train_ratio=constants.TRAIN_RATIO, seed=constants.SEED):
    """Boolean train membership: ceil(count * train_ratio) samples per class."""
    if not 0 < train_ratio < 1:
        raise InvalidArgumentError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    rng = GlobalRandom(seed)
    train = np.zeros(ds.n, dtype=bool)
    for label in np.unique(ds.labels):
        members = np.flatnonzero(ds.labels == label)
        if members.size < 2:
            raise InvalidArgumentError(f"class {label} has {members.size} sample(s), at least 2 are needed")
        n_train = math.ceil(members.size * train_ratio - 1e-9)
        train[rng.sample(members, n_train)] = True
    return train


def split_per_class(ds: ImageDataset, train_ratio=constants.TRAIN_RATIO, seed=constants.SEED):
    """(train, test) partition; both sides keep the input column order."""
    train = split_mask(ds, train_ratio, seed)
    return ds.subset(np.flatnonzero(train)), ds.subset(np.flatnonzero(~train))


def save_pgm(vector, height, width, path, rescale=True):
    """Write a binary PGM.

    With rescale the range [min, max] maps linearly onto [0, 255] and a
    constant vector becomes mid-gray 128; without it values are taken as
    [0, 1] intensities and clipped.
    """
    v = np.asarray(vector, dtype=float).ravel()
    if v.shape[0] != height * width:
        raise DimensionMismatchError(f"vector has {v.shape[0]} entries, expected {height}x{width}")
    if rescale:
        low, high = v.min(), v.max()
        if high > low:
            pixels = np.rint((v - low) / (high - low) * constants.PGM_MAXVAL)
        else:
            pixels = np.full(v.shape, 128.0)
    else:
        pixels = np.rint(np.clip(v, 0.0, 1.0) * constants.PGM_MAXVAL)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels.astype(np.uint8).reshape(height, width)).save(path, format="PPM")


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class ManifestRow:
    file: str
    label: int
    is_train: Optional[bool]
    is_occluded: bool


def manifest_rows(ds: ImageDataset, train=None) -> List[ManifestRow]:
    files = ds.files if ds.files is not None else tuple(f"column_{i:04d}" for i in range(ds.n))
    mask = ds.mask
    return [
        ManifestRow(
            file=files[i],
            label=int(ds.labels[i]),
            is_train=None if train is None else bool(train[i]),
            is_occluded=bool(mask[i]),
        )
        for i in range(ds.n)
    ]


def write_manifest(path, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        writer.writerow(["file", "class", "is_train", "is_occluded"])
        for row in rows:
            is_train = "" if row.is_train is None else int(row.is_train)
            writer.writerow([row.file, row.label, is_train, int(row.is_occluded)])


def read_manifest(path):
    with open(path, newline="") as csvfile:
        reader = csv.DictReader(csvfile)
        if reader.fieldnames != ["file", "class", "is_train", "is_occluded"]:
            raise DataFormatError(f"{path}: expected header file,class,is_train,is_occluded")
        try:
            return [
                ManifestRow(
                    file=row["file"],
                    label=int(row["class"]),
                    is_train=None if row["is_train"] == "" else row["is_train"] == "1",
                    is_occluded=row["is_occluded"] == "1",
                )
                for row in reader
            ]
        except (TypeError, ValueError):
            raise DataFormatError(f"{path}: malformed manifest row") from None
