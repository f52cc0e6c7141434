"""Block-DCT intra codec used to produce the independently decoded views.

Each view is coded on its own: 8x8 orthonormal DCT-II, a uniform quantizer
with step ``2 * qp`` and a zeroth-order entropy estimate of the rate.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

from .core import as_image

BLOCK = 8
MAGIC = b"MVJC"
QP_MIN, QP_MAX = 1, 50
_HEADER = struct.Struct("<4sIIHd")


@dataclass(frozen=True)
class CodecConfig:
    quality: int = 10
    block_size: int = BLOCK

    def __post_init__(self):
        if not QP_MIN <= int(self.quality) <= QP_MAX:
            raise ValueError(f"quality must lie in [{QP_MIN}, {QP_MAX}], got {self.quality}")
        if self.block_size != BLOCK:
            raise ValueError("only 8x8 blocks are supported")

    @property
    def step(self) -> float:
        return quant_step(self.quality)


@dataclass(frozen=True)
class CompressedImage:
    coefficients: np.ndarray  # int16, padded to a multiple of 8
    height: int
    width: int
    quality: int
    estimated_bits: float

    def __eq__(self, other):
        if not isinstance(other, CompressedImage):
            return NotImplemented
        return (self.height, self.width, self.quality, self.estimated_bits) == (
            other.height, other.width, other.quality, other.estimated_bits
        ) and np.array_equal(self.coefficients, other.coefficients)

    def to_bytes(self) -> bytes:
        h, w = self.coefficients.shape
        head = _HEADER.pack(MAGIC, self.height, self.width, self.quality,
                            float(self.estimated_bits))
        return head + self.coefficients.astype("<i2").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompressedImage":
        if len(data) < _HEADER.size:
            raise ValueError("truncated compressed image")
        magic, h, w, qp, bits = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        ph, pw = _padded(h), _padded(w)
        payload = data[_HEADER.size:]
        if len(payload) != ph * pw * 2:
            raise ValueError("coefficient payload has the wrong length")
        coeffs = np.frombuffer(payload, dtype="<i2").reshape(ph, pw).astype(np.int16)
        return cls(coeffs, h, w, qp, bits)


def quant_step(qp: int) -> float:
    return 2.0 * qp


def _padded(n: int) -> int:
    return -(-n // BLOCK) * BLOCK


def _blocks(arr: np.ndarray) -> np.ndarray:
    h, w = arr.shape
    return arr.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2)


def _unblocks(blocks: np.ndarray) -> np.ndarray:
    bh, bw = blocks.shape[:2]
    return blocks.swapaxes(1, 2).reshape(bh * BLOCK, bw * BLOCK)


def block_dct(image: np.ndarray) -> np.ndarray:
    """Orthonormal 8x8 DCT-II of an image whose sides are multiples of 8."""
    return _unblocks(dctn(_blocks(image), axes=(2, 3), norm="ortho"))


def block_idct(coeffs: np.ndarray) -> np.ndarray:
    return _unblocks(idctn(_blocks(coeffs), axes=(2, 3), norm="ortho"))


def _stream_bits(symbols: np.ndarray) -> float:
    """Empirical entropy of a symbol stream plus a codebook description cost."""
    if symbols.size == 0:
        return 0.0
    values, counts = np.unique(symbols, return_counts=True)
    p = counts / symbols.size
    payload = -float(np.sum(counts * np.log2(p)))
    # each codebook entry: sign flag plus the magnitude's bit length
    codebook = float(np.sum(1 + np.ceil(np.log2(np.abs(values) + 1.0))))
    return payload + codebook


def estimate_bits(quantized: np.ndarray) -> float:
    """Rate estimate: separate DC and AC streams, zeroth-order entropy each."""
    blocks = _blocks(quantized).reshape(-1, BLOCK * BLOCK)
    return _stream_bits(blocks[:, 0]) + _stream_bits(blocks[:, 1:].ravel())


def encode(image, config: CodecConfig) -> CompressedImage:
    img = as_image(image)
    h, w = img.shape
    padded = np.pad(img, ((0, _padded(h) - h), (0, _padded(w) - w)), mode="edge")
    coeffs = block_dct(padded - 128.0)
    step = config.step
    q = np.sign(coeffs) * np.floor(np.abs(coeffs) / step + 0.5)
    q = q.astype(np.int16)
    return CompressedImage(q, h, w, int(config.quality), estimate_bits(q))


def decode(compressed: CompressedImage) -> np.ndarray:
    step = quant_step(compressed.quality)
    rec = block_idct(compressed.coefficients.astype(np.float64) * step) + 128.0
    return np.clip(rec[: compressed.height, : compressed.width], 0.0, 255.0)


def compress_views(views, quality: int):
    """Encode every view with the same quantizer and decode it again.

    Returns the decoded images and the total estimated bits.
    """
    config = CodecConfig(quality)
    decoded, bits = [], 0.0
    for view in views:
        c = encode(view, config)
        decoded.append(decode(c))
        bits += c.estimated_bits
    return decoded, bits


def save_compressed(compressed: CompressedImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(compressed.to_bytes())


def load_compressed(path) -> CompressedImage:
    with open(path, "rb") as fh:
        return CompressedImage.from_bytes(fh.read())
