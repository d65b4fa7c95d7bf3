"""Coordinate and representation losses and their multi-stage composition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError
from .types import JointSetUVD


@dataclass(frozen=True)
class LossWeights:
    """Scale factors on the heatmap and depth-map representation losses."""

    lambda_H: float = 1.0
    lambda_D: float = 1.0

    def __post_init__(self):
        if self.lambda_H < 0 or self.lambda_D < 0:
            raise ContractError("loss weights must be nonnegative")


def _as_array(x, cols) -> np.ndarray:
    if isinstance(x, JointSetUVD):
        x = x.joints[:, cols]
    return np.asarray(x, dtype=float)


def _check_same(pred, gt, what):
    if pred.shape != gt.shape:
        raise ContractError(f"{what}: prediction shape {pred.shape} != ground truth shape {gt.shape}")


def loss_uv(pred, gt) -> float:
    """Sum over joints of the squared (u, v) distance."""
    pred, gt = _as_array(pred, slice(0, 2)), _as_array(gt, slice(0, 2))
    _check_same(pred, gt, "loss_uv")
    return float(np.sum((pred - gt) ** 2))


def loss_d(pred, gt) -> float:
    """Sum over joints of the squared depth residual."""
    pred, gt = _as_array(pred, 2), _as_array(gt, 2)
    _check_same(pred, gt, "loss_d")
    return float(np.sum((pred - gt) ** 2))


def _grid_sse(pred, gt, what) -> float:
    pred, gt = np.asarray(pred, dtype=float), np.asarray(gt, dtype=float)
    _check_same(pred, gt, what)
    return float(np.sum((pred - gt) ** 2))


def loss_heatmap(pred, gt) -> float:
    return _grid_sse(pred, gt, "loss_heatmap")


def loss_depthmap(pred, gt) -> float:
    return _grid_sse(pred, gt, "loss_depthmap")


def stage_loss(parts: Mapping[str, float], w: LossWeights = LossWeights()) -> float:
    """L_uv + L_d + lambda_H * L_H + lambda_D * L_D for one stage.

    ``parts`` must hold the keys ``uv``, ``d``, ``H`` and ``D``.
    """
    if any(parts[key] < 0 for key in ("uv", "d", "H", "D")):
        raise ContractError("loss parts must be nonnegative")
    return parts["uv"] + parts["d"] + w.lambda_H * parts["H"] + w.lambda_D * parts["D"]


def total_loss(stages: Sequence[float]) -> float:
    if len(stages) == 0:
        raise ContractError("total_loss needs at least one stage")
    return float(sum(stages))
