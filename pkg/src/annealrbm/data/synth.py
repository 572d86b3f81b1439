"""Synthetic two-class galaxy-like images.

Class 0 is a smooth round blob, class 1 a two-arm logarithmic spiral. Pixel
values lie in [0, 1]; images are flattened row-major.
"""
import logging
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

NOISE_STD = 0.03


def _grid(side: int) -> Tuple[np.ndarray, np.ndarray]:
    centre = (side - 1) / 2.0
    y, x = np.mgrid[0:side, 0:side].astype(np.float64)
    return x - centre, y - centre


def gaussian_blob(side: int, rng: np.random.Generator) -> np.ndarray:
    x, y = _grid(side)
    dx, dy = rng.normal(0.0, 0.02 * side, size=2)
    width = rng.uniform(0.08, 0.2) * side
    amplitude = rng.uniform(0.6, 1.0)
    image = amplitude * np.exp(-((x - dx) ** 2 + (y - dy) ** 2) / (2.0 * width ** 2))
    return np.clip(image + rng.normal(0.0, NOISE_STD, size=image.shape), 0.0, 1.0)


def log_spiral(side: int, rng: np.random.Generator) -> np.ndarray:
    x, y = _grid(side)
    radius = np.hypot(x, y) + 1.0
    angle = np.arctan2(y, x)
    pitch = rng.uniform(0.25, 0.5)
    rotation = rng.uniform(0.0, 2.0 * np.pi)
    amplitude = rng.uniform(0.6, 1.0)

    phase = 2.0 * (angle - np.log(radius) / np.tan(pitch) - rotation)
    arms = (0.5 * (1.0 + np.cos(phase))) ** 4
    envelope = np.exp(-radius / (0.3 * side))
    bulge = np.exp(-(radius ** 2) / (2.0 * (0.04 * side) ** 2))
    image = arms * envelope + 0.5 * bulge
    image = amplitude * image / image.max()
    return np.clip(image + rng.normal(0.0, NOISE_STD, size=image.shape), 0.0, 1.0)


def synth_generate(n_per_class: int, side: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """``n_per_class`` blobs (label 0) followed by ``n_per_class`` spirals (label 1)."""
    if side < 16:
        raise ValueError(f"Synthetic images need side >= 16 pixels, got {side}")
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    blobs = [gaussian_blob(side, rng).ravel() for _ in range(n_per_class)]
    spirals = [log_spiral(side, rng).ravel() for _ in range(n_per_class)]
    images = np.vstack(blobs + spirals)
    labels = np.repeat(np.array([0, 1], dtype=np.int64), n_per_class)
    logger.info(f"Generated {len(images)} synthetic {side}x{side} images")
    return images, labels


def axis_ratio(image: np.ndarray, side: int) -> float:
    """Ratio of the larger to the smaller eigenvalue of the intensity second-moment matrix."""
    image = np.asarray(image, dtype=np.float64).reshape(side, side)
    x, y = _grid(side)
    total = image.sum()
    mx, my = (image * x).sum() / total, (image * y).sum() / total
    cxx = (image * (x - mx) ** 2).sum() / total
    cyy = (image * (y - my) ** 2).sum() / total
    cxy = (image * (x - mx) * (y - my)).sum() / total
    eigenvalues = np.linalg.eigvalsh(np.array([[cxx, cxy], [cxy, cyy]]))
    return float(eigenvalues[1] / eigenvalues[0])
