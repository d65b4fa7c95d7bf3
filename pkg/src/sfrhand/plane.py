"""Heatmap encoder and center-of-mass decoder for plane coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ContractError, DegenerateHeatmapError, OutOfHullError
from .types import com_kernel


@dataclass(frozen=True)
class GaussKernel:
    """Normalized separable Gaussian on a size x size window.

    ``sigma`` defaults to size / 4, which keeps the discarded tail mass of a
    k = 7 window below the renormalization tolerance.
    """

    size: int = 7
    sigma: float | None = None
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ContractError(f"kernel size must be a positive odd integer, got {self.size}")
        sigma = self.size / 4 if self.sigma is None else float(self.sigma)
        if not sigma > 0:
            raise ContractError("kernel sigma must be positive")
        object.__setattr__(self, "sigma", sigma)
        r = self.radius
        x = np.arange(-r, r + 1, dtype=float)
        g = np.exp(-(x**2) / (2 * sigma**2))
        w = np.outer(g, g)
        w /= w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def radius(self) -> int:
        return (self.size - 1) // 2


def _cell_coords(p, n: int) -> tuple[int, int, float, float]:
    """Bracketing cell (low row, low col) and fractional offsets (a along rows, b along cols)."""
    u, v = float(p[0]), float(p[1])
    lo, hi = 0.5 / n, 1.0 - 0.5 / n
    if not (lo <= u <= hi and lo <= v <= hi):
        raise OutOfHullError(f"point ({u}, {v}) outside pixel-center hull [{lo}, {hi}]^2 for n={n}")
    col_f = min(max(u * n - 0.5, 0.0), n - 1.0)
    row_f = min(max(v * n - 0.5, 0.0), n - 1.0)
    i0 = min(int(math.floor(row_f)), max(n - 2, 0))
    k0 = min(int(math.floor(col_f)), max(n - 2, 0))
    return i0, k0, row_f - i0, col_f - k0


def corner_interval(a: float, b: float) -> tuple[float, float]:
    """Feasible range of the (high-row, high-col) corner weight."""
    return max(0.0, a + b - 1.0), min(a, b)


def encode_corners(p, n: int) -> np.ndarray:
    """Basic heatmap: mass on the four pixel centers bracketing ``p``.

    Two COM equations plus unit sum leave one free weight ``t`` (the
    high-row, high-col corner); it is set to the midpoint of its feasible
    interval.
    """
    h = np.zeros((n, n))
    if n == 1:
        _cell_coords(p, n)
        h[0, 0] = 1.0
        return h
    i0, k0, a, b = _cell_coords(p, n)
    t_lo, t_hi = corner_interval(a, b)
    t = 0.5 * (t_lo + t_hi)
    h[i0, k0] = 1.0 - a - b + t
    h[i0 + 1, k0] = a - t
    h[i0, k0 + 1] = b - t
    h[i0 + 1, k0 + 1] = t
    # rounding can leave -1e-17 on a vanishing corner
    np.maximum(h, 0.0, out=h)
    return h


def gauss_smooth(h: np.ndarray, g: GaussKernel) -> np.ndarray:
    """Zero-padded convolution with ``g`` followed by renormalization to unit sum."""
    h = np.asarray(h, dtype=float)
    if g.size == 1:
        return h.copy()
    if h.ndim > 2:
        return np.stack([gauss_smooth(x, g) for x in h])
    out = ndimage.convolve(h, g.weights, mode="constant", cval=0.0)
    return out / out.sum()


def encode_heatmap(p, n: int, g: GaussKernel) -> np.ndarray:
    return gauss_smooth(encode_corners(p, n), g)


def encode_heatmaps(uv: np.ndarray, n: int, g: GaussKernel) -> np.ndarray:
    """Stack of heatmaps, one per row of ``uv``."""
    return np.stack([encode_heatmap(p, n, g) for p in np.asarray(uv)])


def touches_border(h: np.ndarray, k: int) -> bool:
    """True when the support of ``h`` comes within (k - 1) / 2 pixels of an edge.

    Smoothing such a heatmap with a size-k kernel loses mass to the zero
    padding, so its center of mass is not preserved.
    """
    h = np.asarray(h)
    n = h.shape[-1]
    r = (k - 1) // 2
    rows, cols = np.nonzero(h.reshape(-1, n, n).sum(axis=0))
    if rows.size == 0:
        return False
    return bool(rows.min() < r or cols.min() < r or rows.max() > n - 1 - r or cols.max() > n - 1 - r)


def boundary_proximate(p, n: int, k: int) -> bool:
    return touches_border(encode_corners(p, n), k)


def decode_plane(h: np.ndarray, c: np.ndarray | None = None) -> np.ndarray:
    """Center of mass of one heatmap (shape (n, n)) or a stack (shape (..., n, n)).

    Returns (..., 2) with u first.
    """
    h = np.asarray(h, dtype=float)
    if c is None:
        c = com_kernel(h.shape[-1])
    if c.shape != h.shape[-2:] + (2,):
        raise ContractError(f"kernel shape {c.shape} does not match heatmap {h.shape}")
    if np.any(np.all(h.reshape(h.shape[:-2] + (-1,)) == 0, axis=-1)):
        raise DegenerateHeatmapError("cannot decode an all-zero heatmap")
    u = np.sum(h * c[..., 0], axis=(-2, -1))
    v = np.sum(h * c[..., 1], axis=(-2, -1))
    return np.stack([u, v], axis=-1)


def decode_plane_jacobian(h: np.ndarray, c: np.ndarray | None = None) -> np.ndarray:
    """d(u, v)/dh as an (n, n, 2) grid; the decoder is linear so this is ``c`` itself."""
    h = np.asarray(h, dtype=float)
    if c is None:
        c = com_kernel(h.shape[-1])
    return np.array(c, dtype=float)
