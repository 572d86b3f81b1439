import json
import logging
from pathlib import Path
from typing import Union

import numpy as np

logger = logging.getLogger(__name__)


class PcaModel:
    """Top principal directions of mean-centred images, rows of ``components``.

    Each component is signed so that its largest-magnitude entry is positive.
    """

    def __init__(self, mean: np.ndarray, components: np.ndarray, explained_variance_ratio: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        self.components = np.atleast_2d(np.asarray(components, dtype=np.float64))
        self.explained_variance_ratio = np.asarray(explained_variance_ratio, dtype=np.float64).reshape(-1)
        if self.components.shape[1] != self.mean.size:
            raise ValueError(
                f"Components have {self.components.shape[1]} pixels but the mean has {self.mean.size}"
            )
        if self.explained_variance_ratio.size != self.components.shape[0]:
            raise ValueError("One explained-variance ratio is needed per component")

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.mean.size

    def project(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        if images.shape[-1] != self.n_pixels:
            raise ValueError(f"Images have {images.shape[-1]} pixels, model expects {self.n_pixels}")
        return (images - self.mean) @ self.components.T

    def reconstruct(self, projections: np.ndarray) -> np.ndarray:
        return np.asarray(projections, dtype=np.float64) @ self.components + self.mean

    def to_dict(self):
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data) -> "PcaModel":
        return cls(data["mean"], data["components"], data["explained_variance_ratio"])

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PcaModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def pca_fit(images: np.ndarray, k: int) -> PcaModel:
    images = np.atleast_2d(np.asarray(images, dtype=np.float64))
    if k < 1:
        raise ValueError(f"PCA needs k >= 1 components, got {k}")
    if images.shape[0] < k:
        raise ValueError(f"PCA with k={k} needs at least {k} images, got {images.shape[0]}")

    mean = images.mean(axis=0)
    _, singular, vt = np.linalg.svd(images - mean, full_matrices=False)
    tolerance = singular.max(initial=0.0) * max(images.shape) * np.finfo(np.float64).eps
    rank = int(np.count_nonzero(singular > tolerance))
    if k > rank:
        raise ValueError(f"Requested {k} components but the centred data has rank {rank}")

    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    variance = singular ** 2
    ratios = variance[:k] / variance.sum()
    logger.debug(f"PCA fit: {k} components explain {ratios.sum():.3%} of the variance")
    return PcaModel(mean, components, ratios)
