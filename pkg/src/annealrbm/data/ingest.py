import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from .raster import read_pgm

logger = logging.getLogger(__name__)

MANIFEST_NAME = "labels.csv"


def center_crop(image: np.ndarray, size: int) -> np.ndarray:
    height, width = image.shape
    if size > height or size > width:
        raise ValueError(f"Cannot crop a {height}x{width} image to {size}x{size}")
    top = (height - size) // 2
    left = (width - size) // 2
    return image[top:top + size, left:left + size]


def read_manifest(path: Union[str, Path]) -> pd.DataFrame:
    """Label manifest with columns ``filename`` and ``class`` (0 or 1)."""
    manifest = pd.read_csv(path, dtype={"filename": str})
    missing = {"filename", "class"} - set(manifest.columns)
    if missing:
        raise ValueError(f"Manifest {path} lacks columns {sorted(missing)}")
    labels = pd.to_numeric(manifest["class"], errors="coerce")
    unknown = manifest.loc[~labels.isin([0, 1]), "class"]
    if not unknown.empty:
        raise ValueError(f"Manifest {path} has unknown labels {sorted(set(map(str, unknown)))}")
    return manifest.assign(**{"class": labels.astype(np.int64)})


def ingest(
    path: Union[str, Path],
    manifest: Optional[Union[str, Path]] = None,
    crop: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Images listed in the manifest, centre-cropped, flattened row-major, in [0, 1].

    Without ``crop`` every image must already be square and of one size.
    """
    directory = Path(path)
    manifest_path = Path(manifest) if manifest else directory / MANIFEST_NAME
    entries = read_manifest(manifest_path)
    if entries.empty:
        raise ValueError(f"Manifest {manifest_path} lists no images")

    rows = []
    for filename in entries["filename"]:
        image_path = directory / filename
        if not image_path.is_file():
            raise FileNotFoundError(f"Image {image_path} listed in {manifest_path} does not exist")
        image = read_pgm(image_path)
        if crop is not None:
            image = center_crop(image, crop)
        elif image.shape[0] != image.shape[1]:
            raise ValueError(f"{image_path} is {image.shape[0]}x{image.shape[1]}; set a crop size")
        rows.append(image.ravel())

    sizes = {row.size for row in rows}
    if len(sizes) != 1:
        raise ValueError(f"Images have differing pixel counts {sorted(sizes)}; set a crop size")
    logger.info(f"Ingested {len(rows)} images from {directory}")
    return np.vstack(rows), entries["class"].to_numpy()
