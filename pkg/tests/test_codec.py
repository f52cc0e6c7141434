import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.ndimage import gaussian_filter

from mvjoint.codec import (
    CodecConfig,
    CompressedImage,
    block_dct,
    block_idct,
    compress_views,
    decode,
    encode,
    load_compressed,
    quant_step,
    save_compressed,
)
from mvjoint.core import psnr
from mvjoint.scenes import texture

QPS = (1, 10, 20, 30, 40, 50)


def natural(seed=0, shape=(64, 64)):
    return texture(shape, np.random.default_rng(seed))


def test_step_is_twice_quality():
    assert quant_step(7) == 14.0
    assert CodecConfig(25).step == 50.0
    with pytest.raises(ValueError):
        CodecConfig(0)
    with pytest.raises(ValueError):
        CodecConfig(51)


@pytest.mark.parametrize("qp", QPS)
def test_constant_image_has_no_ac(qp):
    c = encode(np.full((16, 24), 77.0), CodecConfig(qp))
    blocks = c.coefficients.reshape(2, 8, 3, 8).transpose(0, 2, 1, 3)
    ac = blocks.copy()
    ac[:, :, 0, 0] = 0
    assert not ac.any()


def test_constant_image_survives_fine_quantizer():
    img = np.full((16, 16), 130.0)
    assert np.array_equal(decode(encode(img, CodecConfig(1))), img)


def test_fine_quantizer_high_psnr():
    floor = min(psnr(img, decode(encode(img, CodecConfig(1))))
                for img in (np.random.default_rng(s).uniform(0, 255, (64, 64)) for s in range(10)))
    assert floor >= 45.0


def test_coarse_quantizer_fewer_bits(rng):
    img = rng.uniform(0, 255, (64, 64))
    assert encode(img, CodecConfig(50)).estimated_bits < encode(img, CodecConfig(1)).estimated_bits


def test_decode_deterministic():
    c = encode(natural(), CodecConfig(20))
    assert np.array_equal(decode(c), decode(c))


def test_rate_and_distortion_monotone():
    img = natural(3)
    codes = [encode(img, CodecConfig(q)) for q in QPS]
    bits = [c.estimated_bits for c in codes]
    quality = [psnr(img, decode(c)) for c in codes]
    assert all(b <= a for a, b in zip(bits, bits[1:]))
    assert all(b <= a + 0.1 for a, b in zip(quality, quality[1:]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_rate_monotone_property(seed):
    img = gaussian_filter(np.random.default_rng(seed).uniform(0, 255, (32, 32)), 1.0)
    bits = [encode(img, CodecConfig(q)).estimated_bits for q in (2, 8, 16, 32, 50)]
    assert all(b <= a for a, b in zip(bits, bits[1:]))


def test_dct_is_orthonormal(rng):
    x = rng.standard_normal((16, 32)) * 100
    coeffs = block_dct(x)
    assert np.linalg.norm(block_idct(coeffs) - x) <= 1e-9 * np.linalg.norm(x)
    assert np.sum(coeffs**2) == pytest.approx(np.sum(x**2), rel=1e-12)


def test_odd_sizes_are_cropped(rng):
    img = rng.uniform(0, 255, (13, 21))
    out = decode(encode(img, CodecConfig(5)))
    assert out.shape == (13, 21)
    assert out.min() >= 0 and out.max() <= 255


def test_file_roundtrip(tmp_path):
    c = encode(natural(1, (20, 30)), CodecConfig(12))
    save_compressed(c, tmp_path / "v.mvjc")
    raw = (tmp_path / "v.mvjc").read_bytes()
    assert raw[:4] == b"MVJC"
    assert load_compressed(tmp_path / "v.mvjc") == c


def test_corrupt_files_rejected():
    c = encode(natural(1, (16, 16)), CodecConfig(12))
    raw = c.to_bytes()
    with pytest.raises(ValueError):
        CompressedImage.from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        CompressedImage.from_bytes(raw[:-2])


def test_compress_views_totals_bits():
    views = [natural(0, (32, 32)), natural(1, (32, 32))]
    decoded, bits = compress_views(views, 20)
    expected = sum(encode(v, CodecConfig(20)).estimated_bits for v in views)
    assert bits == pytest.approx(expected)
    assert all(np.array_equal(d, decode(encode(v, CodecConfig(20)))) for d, v in zip(decoded, views))
