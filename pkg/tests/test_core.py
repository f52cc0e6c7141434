import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mvjoint.core import (
    PSNR_CAP,
    CameraParams,
    DimensionError,
    ImageFormatError,
    as_image,
    load_cameras,
    load_image,
    load_pgm16,
    psnr,
    quantize8,
    reshape,
    reshape_inverse,
    save_cameras,
    save_image,
    save_pgm16,
)


def test_reshape_row_major():
    assert reshape(np.array([[1, 2], [3, 4]])).tolist() == [1, 2, 3, 4]
    assert reshape(np.array([[7]])).tolist() == [7]


def test_reshape_inverse_examples():
    assert reshape_inverse(np.array([1, 2, 3, 4]), 2, 2).tolist() == [[1, 2], [3, 4]]
    assert reshape_inverse(np.array([5]), 1, 1).tolist() == [[5]]
    with pytest.raises(DimensionError):
        reshape_inverse(np.array([1, 2, 3]), 2, 2)


def test_reshape_roundtrip_many(rng):
    for _ in range(1000):
        img = rng.uniform(0, 255, (16, 16))
        assert np.array_equal(reshape_inverse(reshape(img), 16, 16), img)


@given(st.integers(1, 12), st.integers(1, 12), st.data())
def test_reshape_inverse_property(n1, n2, data):
    img = data.draw(arrays(np.float64, (n1, n2), elements=st.floats(0, 255)))
    assert np.array_equal(reshape_inverse(reshape(img), n1, n2), img)


def test_psnr_examples():
    a = np.zeros((2, 2))
    assert psnr(a, a) == PSNR_CAP
    assert psnr(np.zeros((5, 3)), np.full((5, 3), 255.0)) == pytest.approx(0.0, abs=1e-12)
    b = np.array([[10.0, 0], [0, 0]])
    assert psnr(a, b) == pytest.approx(10 * np.log10(65025 / 25))
    assert psnr(a, b) == pytest.approx(34.15, abs=0.01)


def test_psnr_dimension_mismatch():
    with pytest.raises(DimensionError):
        psnr(np.zeros((2, 2)), np.zeros((2, 3)))


@given(arrays(np.float64, (4, 5), elements=st.floats(0, 255)),
       arrays(np.float64, (4, 5), elements=st.floats(0, 255)))
def test_psnr_symmetric(a, b):
    assert psnr(a, b) == psnr(b, a)


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1))
def test_psnr_decreases_with_noise(seed):
    r = np.random.default_rng(seed)
    img = r.uniform(0, 255, (32, 32))
    noise = r.standard_normal((32, 32))
    values = [psnr(img, img + s * noise) for s in (0.5, 1, 2, 4, 8)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_as_image_rejects_bad_input():
    with pytest.raises(DimensionError):
        as_image(np.zeros(4))
    with pytest.raises(ValueError):
        as_image(np.array([[np.nan]]))


def test_quantize8_rounds_half_up_and_clamps():
    out = quantize8(np.array([[0.5, 1.49, -3.0, 300.0, 254.5]]))
    assert out.tolist() == [[1, 1, 0, 255, 255]]


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_image_roundtrip(tmp_path, rng, suffix):
    img = rng.integers(0, 256, (32, 32)).astype(float)
    path = tmp_path / f"img{suffix}"
    save_image(img, path)
    assert np.array_equal(load_image(path), img)


def test_ascii_pgm_matches_binary(tmp_path, rng):
    img = rng.integers(0, 256, (5, 7))
    body = "\n".join(" ".join(str(v) for v in row) for row in img)
    (tmp_path / "a.pgm").write_text(f"P2\n# a comment\n7 5\n255\n{body}\n")
    save_image(img.astype(float), tmp_path / "b.pgm")
    assert np.array_equal(load_image(tmp_path / "a.pgm"), load_image(tmp_path / "b.pgm"))


def test_sixteen_bit_pgm_rejected(tmp_path):
    path = tmp_path / "deep.pgm"
    save_pgm16(np.array([[1, 2], [3, 4]]), path)
    with pytest.raises(ImageFormatError, match="unsupported bit depth"):
        load_image(path)
    assert load_pgm16(path).tolist() == [[1, 2], [3, 4]]


def test_truncated_pgm(tmp_path):
    path = tmp_path / "t.pgm"
    path.write_bytes(b"P5\n4 4\n255\n" + bytes(5))
    with pytest.raises(ImageFormatError):
        load_image(path)


def test_unsupported_format(tmp_path):
    path = tmp_path / "x.pgm"
    path.write_bytes(b"P6\n1 1\n255\n" + bytes(3))
    with pytest.raises(ImageFormatError):
        load_image(path)


def test_camera_roundtrip(tmp_path):
    cams = [CameraParams.simple(500.0, (10, 20)), CameraParams.simple(500.0, (10, 20), (0, 0.1, 0))]
    save_cameras(cams, tmp_path / "c.json")
    loaded = load_cameras(tmp_path / "c.json")
    for a, b in zip(cams, loaded):
        assert np.array_equal(a.P, b.P) and np.array_equal(a.R, b.R) and np.array_equal(a.T, b.T)


def test_camera_validation():
    with pytest.raises(ValueError):
        CameraParams(np.zeros((3, 3)))
    with pytest.raises(ValueError, match="missing key"):
        CameraParams.from_dict({"P": [1] * 9, "R": [1] * 9})
