"""Shared domain types and coordinate conventions.

Normalized plane coordinates live in [0, 1]; pixel (i, k) of an n x n grid
has its center at ((k + 0.5) / n, (i + 0.5) / n), so ``u`` follows columns
and ``v`` follows rows. Normalized depth is also in [0, 1] with 0 reserved
for background.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


def pixel_center(i: int, k: int, n: int) -> tuple[float, float]:
    """Normalized (u, v) of the center of pixel (row i, col k)."""
    if n <= 0 or not (0 <= i < n and 0 <= k < n):
        raise ContractError(f"pixel ({i}, {k}) outside a {n}x{n} grid")
    return ((k + 0.5) / n, (i + 0.5) / n)


def com_kernel(n: int) -> np.ndarray:
    """The (n, n, 2) grid of pixel centers; channel 0 is u, channel 1 is v."""
    centers = (np.arange(n) + 0.5) / n
    c = np.empty((n, n, 2))
    c[..., 0] = centers[None, :]
    c[..., 1] = centers[:, None]
    return c


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """Square grid of normalized depths; 0 marks background."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] == 0:
            raise ContractError(f"depth frame must be a non-empty square grid, got {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ContractError("depth frame values must lie in [0, 1]")

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        return isinstance(other, DepthFrame) and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class JointSetUVD:
    """Ordered joints as rows of (u, v, d) in normalized units."""

    joints: np.ndarray

    def __post_init__(self):
        j = _frozen(self.joints)
        if j.ndim == 1 and j.size == 3:
            j = _frozen(j.reshape(1, 3))
        object.__setattr__(self, "joints", j)
        if j.ndim != 2 or j.shape[1] != 3 or j.shape[0] < 1:
            raise ContractError(f"joint set must have shape (J, 3) with J >= 1, got {j.shape}")
        if not np.all(np.isfinite(j)) or j.min() < 0.0 or j.max() > 1.0:
            raise ContractError("joint coordinates must lie in [0, 1]")

    def __len__(self) -> int:
        return self.joints.shape[0]

    @property
    def uv(self) -> np.ndarray:
        return self.joints[:, :2]

    @property
    def d(self) -> np.ndarray:
        return self.joints[:, 2]

    def __eq__(self, other):
        return isinstance(other, JointSetUVD) and np.array_equal(self.joints, other.joints)


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ContractError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")


@dataclass(frozen=True)
class NormalizationCube:
    """Axis-aligned cube in camera space (mm) used to normalize depth."""

    center: tuple[float, float, float]
    edge: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 3:
            raise ContractError("cube center must be a 3D point")
        if not self.edge > 0:
            raise ContractError(f"cube edge must be positive, got {self.edge}")

    @property
    def near(self) -> float:
        return self.center[2] - self.edge / 2

    @property
    def far(self) -> float:
        return self.center[2] + self.edge / 2

    def normalize_depth(self, z_mm):
        return (np.asarray(z_mm, dtype=float) - self.near) / self.edge

    def denormalize_depth(self, d):
        return np.asarray(d, dtype=float) * self.edge + self.near


@dataclass(frozen=True)
class CropBox:
    """Sensor-pixel rectangle a normalized crop was resampled from.

    Sensor pixel (r, c) has its center at continuous coordinate (c, r).
    Normalized u = 0 maps to ``u0`` and u = 1 to ``u0 + width``.
    """

    u0: float
    v0: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ContractError("crop box must have positive extent")


def validate_heatmap(h: np.ndarray, tol: float = 1e-9) -> None:
    """Raise ContractError unless every grid in ``h`` is a probability map."""
    h = np.asarray(h)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        raise ContractError(f"heatmap must be square, got shape {h.shape}")
    if not np.all(np.isfinite(h)) or np.any(h < 0):
        raise ContractError("heatmap entries must be finite and nonnegative")
    sums = h.sum(axis=(-2, -1))
    if np.any(np.abs(sums - 1.0) > tol):
        raise ContractError(f"heatmap must sum to 1 (got {np.ravel(sums)[:4]})")


def validate_depth_offset_map(d: np.ndarray, h: np.ndarray, mask: np.ndarray) -> None:
    """Raise ContractError if ``d`` is nonzero off the heatmap support or off-hand."""
    d, h, mask = np.asarray(d), np.asarray(h), np.asarray(mask)
    if d.shape != h.shape or d.shape[-2:] != mask.shape:
        raise ContractError("depth map, heatmap and mask shapes disagree")
    invalid = (h == 0) | (mask == 0)
    if np.any(d[invalid] != 0):
        raise ContractError("depth offset map is nonzero outside its valid support")


def validate_mask(mask: np.ndarray, frame: DepthFrame) -> None:
    mask = np.asarray(mask)
    if mask.shape != frame.values.shape:
        raise ContractError("mask and frame shapes disagree")
    if not np.array_equal(mask, (frame.values > 0).astype(mask.dtype)):
        raise ContractError("mask must be 1 exactly on positive-depth pixels")
