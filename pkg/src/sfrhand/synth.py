"""Deterministic synthetic (frame, joints) scenes.

Each joint sits on its own filled disk of on-hand pixels. The disk surface
depth and the joint depth differ by a random offset, so depth decoding has
real offsets to recover.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError
from .types import DepthFrame, JointSetUVD

JITTER = 0.005


@dataclass(frozen=True)
class SynthSpec:
    n_joints: int = 21
    resolution: int = 64
    blob_radius: float = 5.0
    depth_range: tuple[float, float] = (0.3, 0.7)
    seed: int = 0
    # joints keep this many pixels between their bracketing cell and the border
    margin: int = 4

    def __post_init__(self):
        near, far = self.depth_range
        if self.resolution < 16:
            raise ContractError("resolution must be at least 16")
        if not 0 < near < far <= 1:
            raise ContractError("depth_range must satisfy 0 < near < far <= 1")
        if self.n_joints < 1 or self.blob_radius < 0:
            raise ContractError("need n_joints >= 1 and blob_radius >= 0")
        if not (0 <= self.margin and 2 * self.margin < self.resolution - 1):
            raise ContractError("margin leaves no interior")


def derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def generate_scene(spec: SynthSpec) -> tuple[DepthFrame, JointSetUVD]:
    rng = np.random.default_rng(spec.seed)
    n = spec.resolution
    near, far = spec.depth_range
    lo, hi = spec.margin, n - 1 - spec.margin
    # pixel-index coordinates of each joint (col, row)
    pos = rng.uniform(lo, hi, size=(spec.n_joints, 2))
    surface = rng.uniform(near, far, size=spec.n_joints)
    offset = rng.uniform(-0.1, 0.1, size=spec.n_joints) * (far - near)
    jitter = rng.uniform(-JITTER, JITTER, size=(n, n))

    img = np.zeros((n, n))
    rows, cols = np.indices((n, n))
    for (c, r), s in zip(pos, surface):
        disk = (cols - c) ** 2 + (rows - r) ** 2 <= spec.blob_radius**2
        disk[int(np.floor(r + 0.5)), int(np.floor(c + 0.5))] = True
        value = np.clip(s + jitter, 1e-6, 1.0)
        # nearer surface wins where disks overlap
        img = np.where(disk & ((img == 0) | (value < img)), value, img)

    uv = (pos + 0.5) / n
    d = np.clip(surface + offset, 0.0, 1.0)
    return DepthFrame(img), JointSetUVD(np.column_stack([uv, d]))


def generate_corpus(spec: SynthSpec, count: int):
    """``count`` scenes with seeds derived from ``spec.seed`` and a manifest.

    The manifest has one dict per scene: index, seed, joints (J x 3 list).
    """
    if count < 1:
        raise ContractError("count must be at least 1")
    scenes, manifest = [], []
    for i in range(count):
        seed = derived_seed(spec.seed, i)
        frame, joints = generate_scene(replace(spec, seed=seed))
        scenes.append((frame, joints))
        manifest.append({"index": i, "seed": seed, "joints": joints.joints.tolist()})
    return scenes, manifest
