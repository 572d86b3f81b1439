"""Compressed binary datasets: feature bits with the class bit last.

File format::

    CDS1 <n_rows> <n_feature_bits>
    # <provenance>
    0110...1      one line per row, feature bits then class bit
"""
import hashlib
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .encoding import Quantizer, compress
from .pca import PcaModel, pca_fit
from .raster import bits_raster, encode_pgm

logger = logging.getLogger(__name__)

DATASET_MAGIC = "CDS1"


class CompressedDataset:
    def __init__(self, features: np.ndarray, labels: np.ndarray, provenance: str = ""):
        features = np.asarray(features, dtype=np.uint8)
        if features.ndim != 2:
            raise ValueError(f"Features must be a bit matrix, got shape {features.shape}")
        labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
        if labels.size != features.shape[0]:
            raise ValueError(f"{features.shape[0]} feature rows but {labels.size} labels")
        if np.any(features > 1) or np.any(labels > 1):
            raise ValueError("Dataset entries must be bits")
        self.features = features
        self.labels = labels
        self.provenance = provenance.replace("\n", " ")

    @property
    def n_feature_bits(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.labels.size

    @property
    def rows(self) -> np.ndarray:
        """Visible rows for an RBM: feature bits then the class bit, as floats."""
        return np.hstack([self.features, self.labels[:, None]]).astype(np.float64)

    def subset(self, count: int) -> "CompressedDataset":
        return CompressedDataset(self.features[:count], self.labels[:count], self.provenance)

    def feature_hash(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.features).tobytes()).hexdigest()

    def to_text(self) -> str:
        lines = [f"{DATASET_MAGIC} {len(self)} {self.n_feature_bits}", f"# {self.provenance}"]
        for row, label in zip(self.features, self.labels):
            lines.append("".join("1" if bit else "0" for bit in row) + str(int(label)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CompressedDataset":
        lines = text.splitlines()
        header = lines[0].split() if lines else []
        if len(header) != 3 or header[0] != DATASET_MAGIC:
            raise ValueError(f"Not a compressed dataset file (header {lines[0] if lines else ''!r})")
        n_rows, n_bits = int(header[1]), int(header[2])
        provenance = lines[1][2:] if len(lines) > 1 and lines[1].startswith("#") else ""
        body = [line.strip() for line in lines[2:] if line.strip()]
        if len(body) != n_rows:
            raise ValueError(f"Header promises {n_rows} rows, file holds {len(body)}")
        bits = np.zeros((n_rows, n_bits + 1), dtype=np.uint8)
        for index, line in enumerate(body):
            if len(line) != n_bits + 1 or set(line) - {"0", "1"}:
                raise ValueError(f"Row {index} is not a string of {n_bits + 1} bits")
            bits[index] = np.frombuffer(line.encode("ascii"), dtype=np.uint8) - ord("0")
        return cls(bits[:, :-1], bits[:, -1], provenance)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CompressedDataset":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def build_dataset(
    images: np.ndarray,
    labels: np.ndarray,
    fit_fraction: float,
    n_feature_bits: int,
    rng: np.random.Generator,
    test_fraction: float = 0.5,
) -> Tuple[PcaModel, Quantizer, CompressedDataset, CompressedDataset]:
    """Fit PCA and quantizer on a shuffled fitting split, compress the rest into train and test.

    ``n_feature_bits / 8`` components are kept; the fitting images never appear in
    either compressed split.
    """
    if n_feature_bits % 8 != 0 or n_feature_bits < 8:
        raise ValueError(f"n_feature_bits must be a positive multiple of 8, got {n_feature_bits}")
    images = np.atleast_2d(np.asarray(images, dtype=np.float64))
    labels = np.asarray(labels).reshape(-1)
    if images.shape[0] != labels.size:
        raise ValueError(f"{images.shape[0]} images but {labels.size} labels")

    k = n_feature_bits // 8
    order = rng.permutation(images.shape[0])
    n_fit = int(round(fit_fraction * len(order)))
    fit_index, rest = order[:n_fit], order[n_fit:]
    n_test = int(round(test_fraction * len(rest)))
    if n_fit < k or n_test < 1 or len(rest) - n_test < 1:
        raise ValueError(
            f"{len(order)} images cannot supply a PCA fit of {k} components plus train and test splits "
            f"(fit={n_fit}, train={len(rest) - n_test}, test={n_test})"
        )

    model = pca_fit(images[fit_index], k)
    quantizer = Quantizer.fit(model.project(images[fit_index]))
    provenance_hash = hashlib.sha256((model.to_json() + quantizer.model_dump_json()).encode("utf-8")).hexdigest()
    provenance = f"pca k={k} fit_rows={n_fit} model_sha256={provenance_hash[:16]}"

    features = compress(model, quantizer, images[rest])
    test = CompressedDataset(features[:n_test], labels[rest[:n_test]], provenance)
    train = CompressedDataset(features[n_test:], labels[rest[n_test:]], provenance)
    logger.info(
        f"Built dataset: {k} components ({model.explained_variance_ratio.sum():.1%} variance), "
        f"{len(train)} train rows, {len(test)} test rows"
    )
    return model, quantizer, train, test


def render_minibatch(dataset: CompressedDataset, start: int, stop: int) -> Tuple[bytes, int]:
    """P5 raster of the feature bits of rows ``start:stop`` and their total bit sum."""
    if not 0 <= start < stop <= len(dataset):
        raise ValueError(f"Row range {start}:{stop} is empty or outside a dataset of {len(dataset)} rows")
    bits = dataset.features[start:stop]
    return encode_pgm(bits_raster(bits)), int(bits.sum())


def minibatch_caption(dataset: CompressedDataset, start: int, stop: int, bit_sum: int) -> str:
    rows = stop - start
    return (
        f"rows {start}-{stop - 1}: {rows} x {dataset.n_feature_bits} bits, "
        f"bit sum {bit_sum} of a possible {rows * dataset.n_feature_bits}\n"
    )
