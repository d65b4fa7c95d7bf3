import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sfrhand import (CameraIntrinsics, ContractError, CropBox, DepthFrame, JointSetUVD, NormalizationCube,
                     com_kernel, pixel_center)
from sfrhand.types import validate_depth_offset_map, validate_heatmap, validate_mask


@pytest.mark.parametrize("i, k, n, expected", [
    (0, 0, 64, (0.0078125, 0.0078125)),
    (31, 31, 64, (0.4921875, 0.4921875)),
    (63, 0, 64, (0.0078125, 0.9921875)),
])
def test_pixel_center_examples(i, k, n, expected):
    assert pixel_center(i, k, n) == expected


@pytest.mark.parametrize("i, k", [(-1, 0), (0, 64), (64, 3)])
def test_pixel_center_out_of_range(i, k):
    with pytest.raises(ContractError):
        pixel_center(i, k, 64)


@given(st.integers(1, 40))
def test_pixel_center_is_a_bijection_onto_interior_grid(n):
    pts = {pixel_center(i, k, n) for i in range(n) for k in range(n)}
    assert len(pts) == n * n
    assert all(0 < u < 1 and 0 < v < 1 for u, v in pts)
    # inverting the formula recovers the indices
    for i in range(n):
        for k in range(n):
            u, v = pixel_center(i, k, n)
            assert (round(v * n - 0.5), round(u * n - 0.5)) == (i, k)


def test_com_kernel_channels_match_pixel_centers():
    c = com_kernel(5)
    for i in range(5):
        for k in range(5):
            assert tuple(c[i, k]) == pixel_center(i, k, 5)


def test_depth_frame_validation():
    DepthFrame(np.zeros((4, 4)))
    for bad in (np.zeros((4, 3)), np.full((2, 2), 1.5), np.full((2, 2), -0.1), np.full((2, 2), np.nan)):
        with pytest.raises(ContractError):
            DepthFrame(bad)


def test_depth_frame_is_immutable():
    f = DepthFrame(np.full((3, 3), 0.5))
    assert f.resolution == 3
    with pytest.raises(ValueError):
        f.values[0, 0] = 0.2


def test_joint_set_validation_and_views():
    js = JointSetUVD([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
    assert len(js) == 2
    np.testing.assert_array_equal(js.uv, [[0.1, 0.2], [0.4, 0.5]])
    np.testing.assert_array_equal(js.d, [0.3, 0.6])
    for bad in ([[0.1, 0.2]], np.zeros((0, 3)), [[1.2, 0.5, 0.5]], [[0.5, 0.5, -0.01]]):
        with pytest.raises(ContractError):
            JointSetUVD(bad)


def test_geometry_types_validate():
    with pytest.raises(ContractError):
        CameraIntrinsics(0.0, 1.0, 0.0, 0.0)
    with pytest.raises(ContractError):
        NormalizationCube((0.0, 0.0, 400.0), 0.0)
    with pytest.raises(ContractError):
        CropBox(0.0, 0.0, -1.0, 4.0)
    cube = NormalizationCube((0.0, 0.0, 400.0), 250.0)
    assert (cube.near, cube.far) == (275.0, 525.0)
    assert cube.normalize_depth(400.0) == 0.5
    assert cube.denormalize_depth(1.0) == 525.0


@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_random_valid_instances_validate(n, seed):
    rng = np.random.default_rng(seed)
    img = rng.uniform(0.01, 1.0, (n, n)) * (rng.random((n, n)) < 0.6)
    frame = DepthFrame(img)
    h = rng.random((2, n, n))
    h /= h.sum(axis=(1, 2), keepdims=True)
    mask = (img > 0).astype(float)
    d = rng.normal(size=(2, n, n)) * mask * (h > 0)
    validate_heatmap(h)
    validate_mask(mask, frame)
    validate_depth_offset_map(d, h, mask)


def test_validators_reject_violations():
    h = np.full((3, 3), 1 / 9)
    with pytest.raises(ContractError):
        validate_heatmap(h * 1.01)
    bad = h.copy()
    bad[0, 0] = -bad[0, 0]
    with pytest.raises(ContractError):
        validate_heatmap(bad)
    frame = DepthFrame(np.array([[0.0, 0.5], [0.5, 0.5]]))
    with pytest.raises(ContractError):
        validate_mask(np.ones((2, 2)), frame)
    with pytest.raises(ContractError):
        validate_depth_offset_map(np.array([[0.1, 0.0], [0.0, 0.0]]), np.full((2, 2), 0.25),
                                  np.array([[0.0, 1.0], [1.0, 1.0]]))
