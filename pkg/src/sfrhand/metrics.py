"""Mean 3D joint error and the worst-joint threshold curve, plus UVD <-> XYZ."""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .types import CameraIntrinsics, CropBox, JointSetUVD, NormalizationCube

DEFAULT_THRESHOLDS = np.arange(0.0, 81.0, 1.0)


def _joints(j) -> np.ndarray:
    return j.joints if isinstance(j, JointSetUVD) else np.atleast_2d(np.asarray(j, dtype=float))


def uvd_to_xyz(j, cube: NormalizationCube, intr: CameraIntrinsics, crop: CropBox) -> np.ndarray:
    """Normalized (u, v, d) joints -> camera-space millimeters, shape (J, 3)."""
    if not isinstance(intr, CameraIntrinsics):
        raise ContractError("intrinsics required")
    uvd = _joints(j)
    px = crop.u0 + uvd[:, 0] * crop.width
    py = crop.v0 + uvd[:, 1] * crop.height
    z = cube.denormalize_depth(uvd[:, 2])
    return np.column_stack([(px - intr.cx) * z / intr.fx, (py - intr.cy) * z / intr.fy, z])


def xyz_to_uvd(xyz, cube: NormalizationCube, intr: CameraIntrinsics, crop: CropBox) -> np.ndarray:
    xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
    z = xyz[:, 2]
    px = xyz[:, 0] * intr.fx / z + intr.cx
    py = xyz[:, 1] * intr.fy / z + intr.cy
    return np.column_stack([(px - crop.u0) / crop.width, (py - crop.v0) / crop.height,
                            cube.normalize_depth(z)])


def _errors(preds, gts) -> np.ndarray:
    preds = np.asarray(preds, dtype=float)
    gts = np.asarray(gts, dtype=float)
    if preds.shape != gts.shape or preds.ndim != 3:
        raise ContractError(f"prediction shape {preds.shape} does not match ground truth {gts.shape}")
    return np.linalg.norm(preds - gts, axis=2)


def mean_3d_error(preds, gts):
    """Per-joint mean Euclidean error over frames and the mean over joints.

    ``preds`` and ``gts`` have shape (frames, joints, 3) in millimeters.
    """
    err = _errors(preds, gts)
    per_joint = err.mean(axis=0)
    return per_joint, float(per_joint.mean())


def frames_under_threshold(preds, gts, thresholds=DEFAULT_THRESHOLDS) -> np.ndarray:
    """Fraction of frames whose worst joint error is strictly below each threshold."""
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(thresholds) < 0):
        raise ContractError("thresholds must be sorted ascending")
    worst = _errors(preds, gts).max(axis=1)
    return (worst[None, :] < thresholds[:, None]).mean(axis=1)
