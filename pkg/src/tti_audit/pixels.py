"""Model-free pixel features: the colorfulness proxy metric.

Colorfulness follows the Hasler-Susstrunk opponent-channel proxy on raw
8-bit channel values: with rg = R - G and yb = (R + G)/2 - B per pixel,
the score is sqrt(var(rg) + var(yb)) + 0.3 * sqrt(mean(rg)^2 + mean(yb)^2),
using population variances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ValidationError


@dataclass
class RgbImage:
    """Row-major 8-bit RGB pixel buffer."""

    width: int
    height: int
    pixels: np.ndarray  # shape (height, width, 3), dtype uint8

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("image dimensions must be positive")
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValidationError(
                f"pixel buffer shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )

    @classmethod
    def open(cls, path) -> "RgbImage":
        """Decode a PNG/JPEG file; alpha is discarded, only 8-bit RGB kept."""
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr)

    def save(self, path) -> None:
        Image.fromarray(self.pixels, mode="RGB").save(path)

    def gray(self) -> np.ndarray:
        """Luma conversion (0.299 R + 0.587 G + 0.114 B) as float64."""
        px = self.pixels.astype(np.float64)
        return 0.299 * px[:, :, 0] + 0.587 * px[:, :, 1] + 0.114 * px[:, :, 2]


def colorfulness(image: RgbImage) -> float:
    px = image.pixels.astype(np.float64)
    if px.size == 0:
        raise ValidationError("cannot score an empty image")
    rg = px[:, :, 0] - px[:, :, 1]
    yb = 0.5 * (px[:, :, 0] + px[:, :, 1]) - px[:, :, 2]
    sigma = np.sqrt(np.var(rg) + np.var(yb))
    mu = np.sqrt(np.mean(rg) ** 2 + np.mean(yb) ** 2)
    return float(sigma + 0.3 * mu)


def save_colorfulness_csv(scores: dict[str, float], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("image_id,colorfulness\n")
        for image_id, score in scores.items():
            fh.write(f"{image_id},{score!r}\n")


def load_colorfulness_csv(path) -> dict[str, float]:
    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "image_id,colorfulness":
            raise ValidationError(f"{path}: unexpected header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            image_id, _, value = line.rpartition(",")
            scores[image_id] = float(value)
    return scores
