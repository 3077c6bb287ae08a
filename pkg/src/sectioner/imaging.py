"""Byte-to-grayscale imaging of PE sections.

Pipeline order is fixed: pick a width from the size bucket schedule, pad
the final row with zeros, then bilinear-resample to 64x64 with half-pixel
centers and round-half-up.  Identical bytes always produce a bit-identical
image; pixels stay in [0, 255] and are only normalized to [0, 1] at the
CNN boundary.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sectioner.errors import EmptySection
from sectioner.pe import Section

IMAGE_SIDE = 64

# Width buckets follow the published grayscale scheme, plus an 8-wide floor
# bucket because individual sections can be far smaller than whole files.
_KIB = 1024
WIDTH_SCHEDULE: tuple[tuple[int, int], ...] = (
    (int(1.5 * _KIB), 8),
    (10 * _KIB, 32),
    (30 * _KIB, 64),
    (60 * _KIB, 128),
    (100 * _KIB, 256),
    (200 * _KIB, 384),
    (500 * _KIB, 512),
    (1000 * _KIB, 768),
)
MAX_WIDTH = 1024


@dataclass(frozen=True)
class SectionImage:
    """64x64 single-channel image of one section's bytes."""

    section_name: str
    pixels: np.ndarray  # (64, 64) uint8
    source_len: int

    def __post_init__(self):
        if self.pixels.shape != (IMAGE_SIDE, IMAGE_SIDE) or self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be a (64, 64) uint8 array")


def width_for_length(length: int) -> int:
    for bound, width in WIDTH_SCHEDULE:
        if length < bound:
            return width
    return MAX_WIDTH


def bytes_to_grayscale(data: bytes) -> np.ndarray:
    """Row-major byte image at the bucketed width, zero-padded final row."""
    if len(data) == 0:
        raise EmptySection("cannot image an empty byte sequence")
    width = width_for_length(len(data))
    height = -(-len(data) // width)
    buf = np.frombuffer(data, dtype=np.uint8)
    padded = np.zeros(width * height, dtype=np.uint8)
    padded[: len(buf)] = buf
    return padded.reshape(height, width)


def resize_to_64(img: np.ndarray) -> np.ndarray:
    """Bilinear resample to 64x64, half-pixel centers, round half up.

    Sampling coordinates are clamped to the source grid, so constant
    inputs are fixed points and output intensities never leave the input
    range.  A 64x64 input passes through bit-identically.
    """
    in_h, in_w = img.shape
    if in_h < 1 or in_w < 1:
        raise ValueError("source image must be at least 1x1")
    src = img.astype(np.float64)
    ys = (np.arange(IMAGE_SIDE) + 0.5) * in_h / IMAGE_SIDE - 0.5
    xs = (np.arange(IMAGE_SIDE) + 0.5) * in_w / IMAGE_SIDE - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    v00 = src[np.ix_(y0, x0)]
    v01 = src[np.ix_(y0, x1)]
    v10 = src[np.ix_(y1, x0)]
    v11 = src[np.ix_(y1, x1)]
    out = (
        (1.0 - wy) * (1.0 - wx) * v00
        + (1.0 - wy) * wx * v01
        + wy * (1.0 - wx) * v10
        + wy * wx * v11
    )
    rounded = np.floor(out + 0.5)
    return np.clip(rounded, 0.0, 255.0).astype(np.uint8)


def image_section(section: Section) -> SectionImage:
    """Compose bucketing, padding and resizing for one parsed section."""
    pixels = resize_to_64(bytes_to_grayscale(section.data))
    return SectionImage(section_name=section.name, pixels=pixels, source_len=len(section.data))


def image_bytes(name: str, data: bytes) -> SectionImage:
    pixels = resize_to_64(bytes_to_grayscale(data))
    return SectionImage(section_name=name, pixels=pixels, source_len=len(data))


def write_pgm(image: SectionImage, path: Path | str) -> None:
    """Binary PGM (P5), 64x64, maxval 255."""
    path = Path(path)
    header = f"P5\n{IMAGE_SIDE} {IMAGE_SIDE}\n255\n".encode("ascii")
    path.write_bytes(header + image.pixels.tobytes())


def write_raw(image: SectionImage, path: Path | str) -> None:
    """Raw dump: the 4096 resized pixel bytes, row-major."""
    Path(path).write_bytes(image.pixels.tobytes())


def image_dump_name(file_sha256: str, section_name: str, raw: bool = False) -> str:
    stem = section_name.lstrip(".")
    return f"{file_sha256}.{stem}.{'bin' if raw else 'pgm'}"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
