"""Pixel rasters and raster file I/O (PNG, binary PPM).

Two sample domains exist side by side:

* ``display`` — uint8 samples clamped to [0, 255], what files hold.
* ``working`` — signed int32 samples.  Decodes of corrupted streams carry
  DC offsets far outside the display range; restoration needs them intact,
  so clamping happens only at the final display conversion.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
from PIL import Image

DISPLAY = "display"
WORKING = "working"


@dataclasses.dataclass
class ImageBuffer:
    """A planar raster: ``samples`` has shape (height, width, channels)."""

    samples: np.ndarray
    sample_domain: str = DISPLAY

    def __post_init__(self):
        if self.samples.ndim == 2:
            self.samples = self.samples[:, :, None]
        if self.samples.ndim != 3 or self.samples.shape[2] not in (1, 3):
            raise ValueError(f"bad raster shape {self.samples.shape}")
        if self.sample_domain not in (DISPLAY, WORKING):
            raise ValueError(f"unknown sample domain {self.sample_domain!r}")
        if self.sample_domain == DISPLAY:
            if self.samples.dtype != np.uint8:
                arr = np.asarray(self.samples)
                if arr.min() < 0 or arr.max() > 255:
                    raise ValueError("display-domain samples outside [0, 255]")
                self.samples = arr.astype(np.uint8)
        else:
            self.samples = np.asarray(self.samples, dtype=np.int32)

    @property
    def width(self):
        return self.samples.shape[1]

    @property
    def height(self):
        return self.samples.shape[0]

    @property
    def channels(self):
        return self.samples.shape[2]

    def to_display(self) -> "ImageBuffer":
        if self.sample_domain == DISPLAY:
            return self
        clipped = np.clip(self.samples, 0, 255).astype(np.uint8)
        return ImageBuffer(clipped, DISPLAY)

    def to_working(self) -> "ImageBuffer":
        if self.sample_domain == WORKING:
            return self
        return ImageBuffer(self.samples.astype(np.int32), WORKING)

    def luma(self) -> np.ndarray:
        """BT.601 full-range luma as float64, shape (H, W)."""
        s = self.samples.astype(np.float64)
        if self.channels == 1:
            return s[:, :, 0]
        return 0.299 * s[:, :, 0] + 0.587 * s[:, :, 1] + 0.114 * s[:, :, 2]


def from_pil(img: Image.Image) -> ImageBuffer:
    if img.mode not in ("RGB", "L"):
        img = img.convert("RGB")
    return ImageBuffer(np.asarray(img), DISPLAY)


def to_pil(buf: ImageBuffer) -> Image.Image:
    disp = buf.to_display()
    arr = disp.samples
    if disp.channels == 1:
        return Image.fromarray(arr[:, :, 0], "L")
    return Image.fromarray(arr, "RGB")


def load_raster(path) -> ImageBuffer:
    """Read a PNG or binary PPM (P6) file."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        return _read_ppm(path.read_bytes())
    return from_pil(Image.open(path))


def save_raster(buf: ImageBuffer, path) -> None:
    """Write PNG or binary PPM depending on the file extension."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        path.write_bytes(_write_ppm(buf))
    else:
        to_pil(buf).save(path)


def _read_ppm(data: bytes) -> ImageBuffer:
    # P6 header: magic, width, height, maxval, then raw RGB triples.
    if not data.startswith(b"P6"):
        raise ValueError("not a binary PPM (P6) file")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"unsupported PPM maxval {maxval}")
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return ImageBuffer(raw.reshape(h, w, 3).copy(), DISPLAY)


def _write_ppm(buf: ImageBuffer) -> bytes:
    disp = buf.to_display()
    arr = disp.samples
    if disp.channels == 1:
        arr = np.repeat(arr, 3, axis=2)
    header = f"P6\n{disp.width} {disp.height}\n255\n".encode("ascii")
    return header + arr.tobytes()


def resize_bicubic(buf: ImageBuffer, width: int, height: int) -> ImageBuffer:
    """Bicubic resample in the display domain."""
    return from_pil(to_pil(buf).resize((width, height), Image.BICUBIC))


def thumbnail_size(width: int, height: int, max_side: int = 160):
    """Aspect-preserving size whose longer side equals ``max_side``."""
    if width >= height:
        return max_side, max(1, round(height * max_side / width))
    return max(1, round(width * max_side / height)), max_side
