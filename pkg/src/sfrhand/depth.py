"""Local offset depth maps and the heatmap-weighted depth decoder."""

from __future__ import annotations

import numpy as np

from .errors import ContractError, UnsupportedJointError
from .types import DepthFrame

DENOMINATOR_EPS = 1e-12


def _values(img) -> np.ndarray:
    return img.values if isinstance(img, DepthFrame) else np.asarray(img, dtype=float)


def build_mask(img) -> np.ndarray:
    """1 on pixels with positive depth, 0 elsewhere."""
    return (_values(img) > 0).astype(float)


def encode_depth_map(p_d: float, h: np.ndarray, img, m: np.ndarray) -> np.ndarray:
    """Offset from surface to joint depth, kept on the heatmap support and on-hand."""
    img = _values(img)
    h = np.asarray(h, dtype=float)
    if h.shape[-2:] != img.shape or m.shape != img.shape:
        raise ContractError("heatmap, frame and mask must share a resolution")
    p_d = np.asarray(p_d, dtype=float)
    if h.ndim == 3:
        p_d = p_d.reshape(-1, 1, 1)
    return np.where(h > 0, (p_d - img) * m, 0.0)


def _denominator(h, m):
    den = np.sum(m * h, axis=(-2, -1))
    if np.any(den <= DENOMINATOR_EPS):
        bad = np.flatnonzero(np.atleast_1d(den) <= DENOMINATOR_EPS)
        raise UnsupportedJointError(f"heatmap support of joint(s) {bad.tolist()} lies off the hand")
    return den


def decode_depth(d: np.ndarray, h: np.ndarray, img, m: np.ndarray):
    """Heatmap-weighted mean of recovered depths (surface + offset) over on-hand pixels.

    Accepts one joint (grids of shape (n, n)) or a stack (J, n, n).
    """
    img = _values(img)
    d = np.asarray(d, dtype=float)
    h = np.asarray(h, dtype=float)
    if d.shape != h.shape or h.shape[-2:] != img.shape or m.shape != img.shape:
        raise ContractError("depth map, heatmap, frame and mask shapes disagree")
    den = _denominator(h, m)
    num = np.sum(m * h * (img + d), axis=(-2, -1))
    out = num / den
    return float(out) if out.ndim == 0 else out


def decode_depth_jacobian(d: np.ndarray, h: np.ndarray, img, m: np.ndarray):
    """Gradients of the decoded depth with respect to ``d`` and to ``h``."""
    img = _values(img)
    d = np.asarray(d, dtype=float)
    h = np.asarray(h, dtype=float)
    den = _denominator(h, m)
    out = np.asarray(decode_depth(d, h, img, m))
    den_b = np.reshape(den, np.shape(den) + (1, 1))
    out_b = np.reshape(out, np.shape(out) + (1, 1))
    grad_d = m * h / den_b
    grad_h = m * ((img + d) - out_b) / den_b
    return grad_d, grad_h
