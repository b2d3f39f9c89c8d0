"""Grayscale image handling for the force channel.

Camera frames are 8-bit single-channel; the only geometry operation is a
nearest-neighbor downscale from the 240x160 camera resolution to the
45x30 network input, followed by a row-major flatten scaled to [0, 1].
Dataset storage uses binary PGM (P5, maxval 255).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ImageFormatError, ValidationError

CAMERA_WIDTH = 240
CAMERA_HEIGHT = 160
MODEL_INPUT_WIDTH = 45
MODEL_INPUT_HEIGHT = 30


@dataclass
class GrayImage:
    """8-bit single-channel image; pixels indexed [y, x]."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2:
            raise DimensionError("pixel buffer must be 2-D (height, width)")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def resize_nearest(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Nearest-neighbor resize: output (x, y) samples input
    (floor(x*in_w/out_w), floor(y*in_h/out_h))."""
    if out_w < 1 or out_h < 1:
        raise ValidationError("target dimensions must be >= 1")
    xs = (np.arange(out_w) * img.width) // out_w
    ys = (np.arange(out_h) * img.height) // out_h
    return GrayImage(img.pixels[np.ix_(ys, xs)])


def to_model_input(img: GrayImage) -> np.ndarray:
    """Row-major flatten of a 45x30 image, scaled to [0, 1]; shape (1, 1350)."""
    if (img.width, img.height) != (MODEL_INPUT_WIDTH, MODEL_INPUT_HEIGHT):
        raise DimensionError(
            f"model input must be {MODEL_INPUT_WIDTH}x{MODEL_INPUT_HEIGHT}, "
            f"got {img.width}x{img.height}"
        )
    flat = img.pixels.astype(np.float32).reshape(1, -1) / np.float32(255.0)
    return flat


def preprocess_camera_frame(img: GrayImage) -> np.ndarray:
    """Resize a camera frame to model resolution and flatten."""
    return to_model_input(resize_nearest(img, MODEL_INPUT_WIDTH, MODEL_INPUT_HEIGHT))


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments between header fields
    while pos < len(data):
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ImageFormatError("truncated PGM header")
    return data[start:pos], pos


def read_pgm(path) -> GrayImage:
    """Read a binary PGM (P5, maxval 255)."""
    data = open(path, "rb").read()
    if not data.startswith(b"P5"):
        raise ImageFormatError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _read_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise ImageFormatError(f"{path}: bad PGM header field {token!r}") from None
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise ImageFormatError(f"{path}: raster truncated")
    return GrayImage(np.frombuffer(raster, dtype=np.uint8).reshape(height, width))


def write_pgm(path, img: GrayImage):
    with open(path, "wb") as f:
        f.write(f"P5 {img.width} {img.height} 255\n".encode("ascii"))
        f.write(img.pixels.tobytes())
