"""Quantization of PCA projections to bytes and bytes to MSB-first bits."""
from pathlib import Path
from typing import List, Union

import numpy as np
from pydantic import BaseModel, model_validator

from .pca import PcaModel

QUANT_LOW = 15
QUANT_HIGH = 240


def round_half_away(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


class Quantizer(BaseModel):
    """Per-component linear map of the fitting range onto [15, 240]."""

    mins: List[float]
    maxs: List[float]

    @model_validator(mode="after")
    def _check_ranges(self) -> "Quantizer":
        if len(self.mins) != len(self.maxs):
            raise ValueError(f"{len(self.mins)} minimums but {len(self.maxs)} maximums")
        for index, (low, high) in enumerate(zip(self.mins, self.maxs)):
            if not low < high:
                raise ValueError(f"Component {index} has an empty range [{low}, {high}]")
        return self

    @classmethod
    def fit(cls, projections: np.ndarray) -> "Quantizer":
        projections = np.atleast_2d(np.asarray(projections, dtype=np.float64))
        return cls(mins=projections.min(axis=0).tolist(), maxs=projections.max(axis=0).tolist())

    def quantize(self, projections: np.ndarray) -> np.ndarray:
        projections = np.asarray(projections, dtype=np.float64)
        if projections.shape[-1] != len(self.mins):
            raise ValueError(f"Projections have {projections.shape[-1]} components, quantizer has {len(self.mins)}")
        low = np.asarray(self.mins)
        high = np.asarray(self.maxs)
        raw = QUANT_LOW + (projections - low) * (QUANT_HIGH - QUANT_LOW) / (high - low)
        return np.clip(round_half_away(raw), 0, 255).astype(np.uint8)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.model_dump_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Quantizer":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


def bytes_to_bits(values: np.ndarray) -> np.ndarray:
    """Big-endian bits of each byte, concatenated in component order."""
    return np.unpackbits(np.asarray(values, dtype=np.uint8), axis=-1)


def bits_to_bytes(bits: np.ndarray) -> np.ndarray:
    return np.packbits(np.asarray(bits, dtype=np.uint8), axis=-1)


def compress(model: PcaModel, quantizer: Quantizer, images: np.ndarray) -> np.ndarray:
    """Feature bits (uint8 0/1) of one image or a batch of images."""
    return bytes_to_bits(quantizer.quantize(model.project(images)))
