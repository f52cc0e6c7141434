"""Image containers, camera geometry and file I/O.

Images are plain 2-D ``float64`` numpy arrays holding intensities on the
0..255 scale. Vectors are their row-major flattenings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PSNR_CAP = 99.0
PEAK = 255.0


class DimensionError(ValueError):
    """Raised when array sizes do not agree."""


class ImageFormatError(ValueError):
    """Raised for unreadable or unsupported image files."""


def as_image(data) -> np.ndarray:
    """Validate ``data`` as a grayscale image and return a float64 copy."""
    img = np.array(data, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise DimensionError(f"expected a non-empty 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite samples")
    return img


def reshape(image: np.ndarray) -> np.ndarray:
    """Flatten an image row by row (left to right, then top to bottom)."""
    return np.ascontiguousarray(image).reshape(-1)


def reshape_inverse(vector: np.ndarray, n1: int, n2: int) -> np.ndarray:
    vector = np.asarray(vector)
    if vector.ndim != 1 or vector.size != n1 * n2:
        raise DimensionError(
            f"vector of length {vector.size} cannot form a {n1}x{n2} image"
        )
    return vector.reshape(n1, n2)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit peak, capped at 99 dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(PEAK**2 / mse))


def mean_psnr(originals, images) -> float:
    return float(np.mean([psnr(o, i) for o, i in zip(originals, images)]))


def quantize8(image: np.ndarray) -> np.ndarray:
    """Round half up and clamp to 0..255."""
    return np.clip(np.floor(np.asarray(image, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


# --------------------------------------------------------------------------
# Cameras
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CameraParams:
    """Pinhole camera: intrinsics ``P``, rotation ``R`` and translation ``T``.

    Homogeneous pixel coordinates are ``(row, col, 1)``; ``P`` maps camera
    coordinates to that ordering.
    """

    P: np.ndarray
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    T: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64).reshape(3, 3)
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        T = np.asarray(self.T, dtype=np.float64).reshape(3)
        for name, mat in (("P", P), ("R", R)):
            if not np.isfinite(np.linalg.cond(mat)):
                raise ValueError(f"camera matrix {name} is singular")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "T", T)

    @classmethod
    def simple(cls, focal: float, center=(0.0, 0.0), translation=(0.0, 0.0, 0.0)):
        P = np.array([[focal, 0, center[0]], [0, focal, center[1]], [0, 0, 1.0]])
        return cls(P, np.eye(3), np.asarray(translation, dtype=np.float64))

    def to_dict(self) -> dict:
        return {"P": self.P.ravel().tolist(), "R": self.R.ravel().tolist(),
                "T": self.T.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraParams":
        try:
            P, R, T = d["P"], d["R"], d["T"]
        except KeyError as exc:
            raise ValueError(f"camera entry is missing key {exc.args[0]!r}") from None
        if len(P) != 9 or len(R) != 9 or len(T) != 3:
            raise ValueError("camera entry needs 9 values for P and R and 3 for T")
        return cls(np.array(P), np.array(R), np.array(T))


def load_cameras(path) -> list[CameraParams]:
    """Read a JSON file holding one camera object or a list of them."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("cameras", [data])
    return [CameraParams.from_dict(d) for d in data]


def save_cameras(cameras, path) -> None:
    with open(path, "w") as fh:
        json.dump([c.to_dict() for c in cameras], fh, indent=1)


# --------------------------------------------------------------------------
# Image files
# --------------------------------------------------------------------------


def _pgm_tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def _read_pgm(data: bytes, allow16: bool = False) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise ImageFormatError(f"not a PGM file (magic {magic!r})")
    (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise ImageFormatError("malformed PGM header") from None
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise ImageFormatError("malformed PGM header")
    if maxval > 255 and not allow16:
        raise ImageFormatError("unsupported bit depth")
    if magic == b"P2":
        values = data[pos:].split()
        if len(values) < w * h:
            raise ImageFormatError("truncated PGM raster")
        arr = np.array([int(v) for v in values[: w * h]], dtype=np.int64)
    else:
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        nbytes = w * h * dtype.itemsize
        if len(data) - pos < nbytes:
            raise ImageFormatError("truncated PGM raster")
        arr = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).astype(np.int64)
    if arr.max(initial=0) > maxval:
        raise ImageFormatError("sample exceeds declared maxval")
    return arr.reshape(h, w)


def load_image(path) -> np.ndarray:
    """Load an 8-bit grayscale PGM (P5 or P2) or PNG image as float64."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P5", b"P2"):
        return _read_pgm(data).astype(np.float64)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        from PIL import Image as PILImage

        try:
            with PILImage.open(path) as im:
                im.load()
                if im.mode not in ("L", "P", "1"):
                    if im.mode in ("I;16", "I;16B", "I"):
                        raise ImageFormatError("unsupported bit depth")
                    raise ImageFormatError(f"unsupported PNG mode {im.mode} (grayscale only)")
                return np.asarray(im.convert("L"), dtype=np.float64)
        except OSError as exc:
            raise ImageFormatError(f"cannot read PNG: {exc}") from None
    raise ImageFormatError(f"unsupported image format: {path}")


def save_image(image: np.ndarray, path) -> None:
    """Save as 8-bit P5 PGM, or PNG when the suffix is ``.png``."""
    path = Path(path)
    pixels = quantize8(as_image(image))
    if path.suffix.lower() == ".png":
        from PIL import Image as PILImage

        PILImage.fromarray(pixels, mode="L").save(path)
        return
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(pixels.tobytes())


def save_pgm16(labels: np.ndarray, path) -> None:
    """Write integer data as a 16-bit big-endian P5 PGM."""
    arr = np.asarray(labels)
    if arr.min(initial=0) < 0 or arr.max(initial=0) > 65535:
        raise ValueError("values out of 16-bit range")
    h, w = arr.shape
    maxval = max(int(arr.max(initial=0)), 256)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        fh.write(arr.astype(">u2").tobytes())


def load_pgm16(path) -> np.ndarray:
    data = Path(path).read_bytes()
    return _read_pgm(data, allow16=True)
