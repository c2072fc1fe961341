"""8-bit RGB image buffers and codec plumbing shared by dataset, ingest, and detector."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .geometry import LetterboxTransform

# Pad value applied outside the resampled content when letterboxing pixels.
LETTERBOX_PAD_VALUE = 114


class ImageDecodeError(ValueError):
    """Raised when bytes cannot be decoded as a supported image format."""


@dataclass(frozen=True)
class ImageRGB:
    """Row-major 8-bit RGB pixel buffer; len(pixels) == width*height*3."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")
        expected = self.width * self.height * 3
        if len(self.pixels) != expected:
            raise ValueError(f"pixel buffer length {len(self.pixels)} != {expected}")

    def to_array(self) -> np.ndarray:
        """View as an (height, width, 3) uint8 array (copy)."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, 3).copy()

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageRGB":
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
            raise ValueError(f"expected (h, w, 3) uint8 array, got {arr.shape} {arr.dtype}")
        h, w = arr.shape[:2]
        return cls(width=w, height=h, pixels=arr.tobytes())

    @classmethod
    def filled(cls, width: int, height: int, rgb: tuple[int, int, int] = (0, 0, 0)) -> "ImageRGB":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:, :] = rgb
        return cls.from_array(arr)


def decode_image(data: bytes) -> ImageRGB:
    """Decode JPEG or PNG bytes into RGB; grayscale inputs are promoted to r=g=b."""
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            if im.format not in ("JPEG", "PNG"):
                raise ImageDecodeError(f"unsupported image format: {im.format}")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except ImageDecodeError:
        raise
    except Exception as exc:
        raise ImageDecodeError(f"cannot decode image: {exc}") from exc
    return ImageRGB.from_array(arr)


def encode_image(img: ImageRGB, format: str = "jpeg", quality: int = 90) -> bytes:
    """Encode to JPEG or PNG bytes."""
    fmt = format.lower()
    if fmt not in ("jpeg", "png"):
        raise ValueError(f"unsupported encode format: {format}")
    pil = PILImage.fromarray(img.to_array(), mode="RGB")
    buf = io.BytesIO()
    if fmt == "jpeg":
        pil.save(buf, format="JPEG", quality=quality)
    else:
        pil.save(buf, format="PNG")
    return buf.getvalue()


def letterbox_image(img: ImageRGB, t: LetterboxTransform) -> ImageRGB:
    """Resample (bilinear) into the transform's content region, padding with 114.

    This realizes the preprocessing contract an external model server must
    follow; the service itself only needs the plan for coordinate mapping.
    """
    if t.src_w != img.width or t.src_h != img.height:
        raise ValueError(f"transform is for {t.src_w}x{t.src_h}, image is {img.width}x{img.height}")
    new_w = max(1, round(img.width * t.scale))
    new_h = max(1, round(img.height * t.scale))
    pil = PILImage.fromarray(img.to_array(), mode="RGB")
    resized = pil.resize((new_w, new_h), resample=PILImage.BILINEAR)
    canvas = np.full((t.dst_side, t.dst_side, 3), LETTERBOX_PAD_VALUE, dtype=np.uint8)
    ox = int(round(t.pad_x))
    oy = int(round(t.pad_y))
    canvas[oy : oy + new_h, ox : ox + new_w] = np.asarray(resized, dtype=np.uint8)
    return ImageRGB.from_array(canvas)
