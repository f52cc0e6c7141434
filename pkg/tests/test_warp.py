import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvjoint.core import CameraParams, DimensionError
from mvjoint.depth import DepthField
from mvjoint.scenes import SceneSpec, generate
from mvjoint.warp import (
    MotionField,
    WarpOperator,
    build_operator,
    motion_from_depth,
    uniform_motion,
)
from oracles import forward_warp


def random_motion(r, shape, reach=3):
    return MotionField(r.integers(-reach, reach + 1, shape), r.integers(-reach, reach + 1, shape))


def test_zero_motion_is_identity():
    op, mask = build_operator(uniform_motion((3, 4)))
    assert np.array_equal(op.source, np.arange(12))
    assert op.hole_rows.size == 0 and np.all(mask == 1)


def test_last_writer_wins_hand_trace():
    op, mask = build_operator(MotionField([[1, 0, 0]], [[0, 0, 0]]))
    rows, cols = op.entries
    assert sorted(zip(rows.tolist(), cols.tolist())) == [(1, 1), (2, 2)]
    assert op.hole_rows.tolist() == [0]
    assert mask.tolist() == [0, 1, 1]


def test_uniform_shift_hand_trace():
    op, _ = build_operator(uniform_motion((1, 4), horizontal=1))
    rows, cols = op.entries
    assert dict(zip(rows.tolist(), cols.tolist())) == {1: 0, 2: 1, 3: 2}
    assert op.hole_rows.tolist() == [0]
    assert 3 not in cols


def test_apply_matches_pixel_pushing(rng):
    for _ in range(50):
        shape = tuple(rng.integers(1, 9, 2))
        motion = random_motion(rng, shape)
        img = rng.uniform(0, 255, shape)
        op, _ = build_operator(motion)
        expected, holes = forward_warp(img, motion.horizontal, motion.vertical)
        assert np.array_equal(op.apply(img.ravel()).reshape(shape), expected)
        assert np.array_equal(op.mask().reshape(shape) == 0, holes)


def test_hole_rows_zero_regardless_of_input(rng):
    op, _ = build_operator(random_motion(rng, (6, 6)))
    out = op.apply(rng.uniform(1, 2, 36))
    assert np.all(out[op.hole_rows] == 0)


@settings(max_examples=100)
@given(st.integers(0, 2**31 - 1))
def test_adjoint_identity(seed):
    r = np.random.default_rng(seed)
    shape = tuple(r.integers(1, 10, 2))
    op, _ = build_operator(random_motion(r, shape))
    x, y = r.standard_normal((2, op.size))
    lhs, rhs = op.apply(x) @ y, x @ op.apply_transpose(y)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1))
def test_partial_permutation_structure(seed):
    r = np.random.default_rng(seed)
    op, mask = build_operator(random_motion(r, (5, 6)))
    a = op.to_sparse().toarray()
    for g in (a.T @ a, a @ a.T):
        assert np.array_equal(g, np.diag(np.diag(g)))
        assert set(np.diag(g).tolist()) <= {0.0, 1.0}
    assert not np.any((1 - mask)[:, None] * a)
    if op.nnz:
        assert np.linalg.norm(a, 2) == pytest.approx(1.0)


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_apply_is_linear(seed, alpha, beta):
    r = np.random.default_rng(seed)
    op, _ = build_operator(random_motion(r, (4, 7)))
    x, z = r.standard_normal((2, op.size))
    assert np.array_equal(op.apply(alpha * x + beta * z),
                          alpha * op.apply(x) + beta * op.apply(z))


def test_batched_apply(rng):
    op, _ = build_operator(random_motion(rng, (4, 4)))
    xs = rng.standard_normal((3, 16))
    assert np.array_equal(op.apply(xs), np.stack([op.apply(x) for x in xs]))
    assert np.array_equal(op.apply_transpose(xs), np.stack([op.apply_transpose(x) for x in xs]))


def test_identity_operator(rng):
    op = WarpOperator.identity((3, 5))
    x = rng.standard_normal(15)
    assert np.array_equal(op.apply(x), x) and np.array_equal(op.apply_transpose(x), x)


def test_dimension_errors():
    op = WarpOperator.identity((2, 2))
    with pytest.raises(DimensionError):
        op.apply(np.zeros(5))
    with pytest.raises(DimensionError):
        op.apply_transpose(np.zeros(3))
    with pytest.raises(DimensionError):
        MotionField(np.zeros((2, 2)), np.zeros((2, 3)))


def test_motion_from_rectified_depth():
    depth = DepthField(np.full((3, 4), 5), np.arange(8))
    m = motion_from_depth(depth)
    assert np.all(m.horizontal == -5) and np.all(m.vertical == 0)
    m = motion_from_depth(depth, baseline=-1)
    assert np.all(m.horizontal == 5)


def test_motion_identical_cameras_is_zero():
    cam = CameraParams.simple(100.0, (2, 2))
    depth = DepthField(np.zeros((4, 4), int), np.array([3.0, 5.0]), rectified=False)
    m = motion_from_depth(depth, cam, cam)
    assert not m.horizontal.any() and not m.vertical.any()


def test_motion_two_plane_scene_matches_shifts():
    scene = generate(SceneSpec("two-plane-occlusion", 32, 32, shift=1, foreground_shift=4))
    m = motion_from_depth(scene.true_depth())
    assert np.array_equal(m.horizontal, -scene.disparity)


def test_calibrated_motion_matches_pinhole():
    f, b = 200.0, 0.05
    cam1 = CameraParams.simple(f)
    cam2 = CameraParams.simple(f, translation=(0, b, 0))
    depth = DepthField(np.zeros((3, 6), int), np.array([2.0]), rectified=False)
    m = motion_from_depth(depth, cam1, cam2)
    assert np.all(m.horizontal == -int(np.floor(f * b / 2.0 + 0.5)))


def test_triplet_file_roundtrip(tmp_path, rng):
    op, _ = build_operator(random_motion(rng, (5, 5)))
    op.save(tmp_path / "a.txt", tmp_path / "m.txt")
    lines = (tmp_path / "a.txt").read_text().splitlines()
    assert lines[0] == f"25 {op.nnz}"
    assert (tmp_path / "m.txt").read_text().strip() == "".join(
        "1" if s >= 0 else "0" for s in op.source)
    assert np.array_equal(WarpOperator.load(tmp_path / "a.txt", (5, 5)).source, op.source)
