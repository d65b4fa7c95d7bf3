"""Frame preparation: background removal, cube crop, normalization, resizing, rotation.

All resampling is nearest-neighbor so background stays exactly 0 and the
hand mask never picks up blended fake depths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, EmptyCropError, EmptyHandError
from .types import CameraIntrinsics, CropBox, DepthFrame, JointSetUVD, NormalizationCube


@dataclass(frozen=True, eq=False)
class RawFrame:
    """Sensor depth image in millimeters; 0 marks invalid pixels."""

    depth: np.ndarray
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        d = np.array(self.depth, dtype=float)
        d.setflags(write=False)
        object.__setattr__(self, "depth", d)
        if d.ndim != 2:
            raise ContractError("raw depth must be a 2D grid")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ContractError("raw depths must be finite and nonnegative")


@dataclass(frozen=True)
class PreprocessConfig:
    input_size: int = 128
    repr_size: int = 64
    cube_edge: float = 250.0
    rotation_range: float = 30.0
    background_threshold: float = 150.0
    bbox_margin: float = 25.0

    def __post_init__(self):
        if not self.input_size > self.repr_size > 0:
            raise ContractError("need input_size > repr_size > 0")
        if not self.cube_edge > 0:
            raise ContractError("cube_edge must be positive")
        if self.rotation_range < 0:
            raise ContractError("rotation_range must be nonnegative")


def project(points_xyz, intr: CameraIntrinsics) -> np.ndarray:
    """Camera-space mm -> continuous sensor pixel coordinates (px, py)."""
    p = np.atleast_2d(np.asarray(points_xyz, dtype=float))
    z = p[:, 2]
    return np.column_stack([p[:, 0] * intr.fx / z + intr.cx, p[:, 1] * intr.fy / z + intr.cy])


def back_project(px, py, z, intr: CameraIntrinsics) -> np.ndarray:
    px, py, z = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (px, py, z)))
    return np.stack([(px - intr.cx) * z / intr.fx, (py - intr.cy) * z / intr.fy, z], axis=-1)


def remove_background(raw: RawFrame, joints_xyz, cfg: PreprocessConfig = PreprocessConfig()) -> RawFrame:
    """Keep pixels inside the projected joint box and near the joints' depth range.

    The box is grown by ``bbox_margin`` mm, converted to pixels at the
    nearest joint depth. A pixel survives when its cell overlaps the box.
    """
    joints = np.atleast_2d(np.asarray(joints_xyz, dtype=float))
    if joints.shape[0] < 1 or joints.shape[1] != 3:
        raise ContractError("need at least one 3D joint")
    intr = raw.intrinsics
    uv = project(joints, intr)
    z_lo, z_hi = joints[:, 2].min(), joints[:, 2].max()
    mx = cfg.bbox_margin * intr.fx / z_lo
    my = cfg.bbox_margin * intr.fy / z_lo
    rows, cols = np.indices(raw.depth.shape)
    inside = ((cols >= uv[:, 0].min() - mx - 0.5) & (cols <= uv[:, 0].max() + mx + 0.5)
              & (rows >= uv[:, 1].min() - my - 0.5) & (rows <= uv[:, 1].max() + my + 0.5))
    z = raw.depth
    near = (z >= z_lo - cfg.background_threshold) & (z <= z_hi + cfg.background_threshold)
    keep = inside & near & (z > 0)
    if not keep.any():
        raise EmptyHandError("background removal left no pixels")
    return RawFrame(np.where(keep, z, 0.0), intr)


def hand_center(raw: RawFrame) -> np.ndarray:
    """Centroid (mm) of all nonzero pixels back-projected to camera space."""
    rows, cols = np.nonzero(raw.depth)
    if rows.size == 0:
        raise EmptyCropError("frame has no valid pixels")
    pts = back_project(cols, rows, raw.depth[rows, cols], raw.intrinsics)
    return pts.mean(axis=0)


def crop_box(cube: NormalizationCube, intr: CameraIntrinsics) -> CropBox:
    """Sensor rectangle covered by the cube's cross-section at its center depth."""
    cx, cy = project(cube.center, intr)[0]
    zc = cube.center[2]
    hw = cube.edge / 2 * intr.fx / zc
    hh = cube.edge / 2 * intr.fy / zc
    return CropBox(cx - hw, cy - hh, 2 * hw, 2 * hh)


def crop_normalize(raw: RawFrame, cube: NormalizationCube | None = None,
                   cfg: PreprocessConfig = PreprocessConfig()):
    """Resample the cube's image region to m x m and map depth into [0, 1].

    Without an explicit ``cube`` one of edge ``cfg.cube_edge`` is centered on
    ``hand_center(raw)``. Depths in (near, far] map affinely to (0, 1];
    everything else becomes background 0. Returns (DepthFrame, cube, CropBox).
    """
    if cube is None:
        cube = NormalizationCube(tuple(hand_center(raw)), cfg.cube_edge)
    if not cube.center[2] > 0:
        raise ContractError("cube center must lie in front of the camera")
    box = crop_box(cube, raw.intrinsics)
    m = cfg.input_size
    centers = (np.arange(m) + 0.5) / m
    src_c = np.floor(box.u0 + centers * box.width + 0.5).astype(int)
    src_r = np.floor(box.v0 + centers * box.height + 0.5).astype(int)
    H, W = raw.depth.shape
    valid_c = (src_c >= 0) & (src_c < W)
    valid_r = (src_r >= 0) & (src_r < H)
    z = np.zeros((m, m))
    z[np.ix_(valid_r, valid_c)] = raw.depth[np.ix_(src_r[valid_r], src_c[valid_c])]
    in_cube = (z > cube.near) & (z <= cube.far)
    if not in_cube.any():
        raise EmptyCropError("no on-hand pixel falls inside the normalization cube")
    values = np.where(in_cube, cube.normalize_depth(np.where(in_cube, z, cube.near)), 0.0)
    return DepthFrame(np.clip(values, 0.0, 1.0)), cube, box


def denormalize_frame(frame: DepthFrame, cube: NormalizationCube) -> np.ndarray:
    """Inverse depth map of crop_normalize; background stays 0."""
    v = frame.values
    return np.where(v > 0, cube.denormalize_depth(v), 0.0)


def downsample_repr(frame: DepthFrame, n: int) -> DepthFrame:
    """Keep the top-left sample of every (m/n) x (m/n) block."""
    m = frame.resolution
    if n <= 0 or m % n:
        raise ContractError(f"input size {m} is not divisible by representation size {n}")
    s = m // n
    return DepthFrame(frame.values[::s, ::s])


def rotate_uv(uv, angle: float) -> np.ndarray:
    """Rotate normalized (u, v) points about (0.5, 0.5).

    Positive angles turn the image counter-clockwise as displayed (row 0 at
    the top), the same sense as ``np.rot90``: at 90 degrees (u, v) -> (v, 1 - u).
    """
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    t = math.radians(angle)
    c, s = math.cos(t), math.sin(t)
    x, y = uv[:, 0] - 0.5, uv[:, 1] - 0.5
    return np.column_stack([c * x + s * y + 0.5, -s * x + c * y + 0.5])


def rotate_grid(values: np.ndarray, angle: float) -> np.ndarray:
    """Nearest-neighbor rotation of an (..., n, n) grid about its center, zero fill."""
    values = np.asarray(values)
    n = values.shape[-1]
    if angle % 90 == 0:
        return np.rot90(values, k=int(angle // 90) % 4, axes=(-2, -1)).copy()
    centers = (np.arange(n) + 0.5) / n
    vv, uu = np.meshgrid(centers, centers, indexing="ij")
    # inverse map: output pixel -> source position
    src = rotate_uv(np.column_stack([uu.ravel(), vv.ravel()]), -angle)
    col = np.floor(src[:, 0] * n).astype(int)
    row = np.floor(src[:, 1] * n).astype(int)
    ok = (col >= 0) & (col < n) & (row >= 0) & (row < n)
    out = np.zeros(values.shape[:-2] + (n * n,), dtype=values.dtype)
    out[..., ok] = values[..., row[ok], col[ok]]
    return out.reshape(values.shape)


def random_angle(seed, rotation_range: float = 30.0) -> float:
    return float(np.random.default_rng(seed).uniform(-rotation_range, rotation_range))


def rotate_augment(frame: DepthFrame, joints: JointSetUVD, angle: float | None = None,
                   seed=None, rotation_range: float = 30.0):
    """Rotate frame and joint plane coordinates together; depth is untouched.

    With ``angle`` None a uniform angle in [-rotation_range, rotation_range]
    is drawn from ``seed``. Raises ContractError if a joint leaves [0, 1]^2.
    """
    if angle is None:
        angle = random_angle(seed, rotation_range)
    elif abs(angle) > rotation_range:
        raise ContractError(f"angle {angle} exceeds rotation range {rotation_range}")
    uv = rotate_uv(joints.uv, angle)
    # cos/sin rounding can push a boundary coordinate a hair outside [0, 1]
    uv = np.where(np.abs(uv) < 1e-12, 0.0, uv)
    uv = np.where(np.abs(uv - 1) < 1e-12, 1.0, uv)
    return DepthFrame(rotate_grid(frame.values, angle)), JointSetUVD(np.column_stack([uv, joints.d]))
