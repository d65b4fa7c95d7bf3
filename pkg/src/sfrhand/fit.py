"""Fit heatmaps and offset maps to a target pose through the differentiable decoders.

The heatmap of each joint is the softmax of a free score grid, so it stays on
the probability simplex; offsets are free values multiplied by the hand mask.
Updates are fixed-step damped Gauss-Newton steps (no momentum, no line
search). Plain gradient descent stalls here: softmax scores can only reach
the zeros of an encoder heatmap asymptotically and the curvature of those
tail pixels shrinks like H^2, while the heatmap peak bounds the usable step.

Three objectives are available:

``full``
    coordinate losses plus weighted representation losses against the
    encoder targets.
``coordinate_unsupervised``
    representation losses only; decoded coordinates are computed after the
    fact and never enter the objective.
``representation_unsupervised``
    coordinate losses only, with gradients flowing through both decoders.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .depth import build_mask, decode_depth, encode_depth_map
from .errors import ContractError, DivergenceError
from .losses import LossWeights
from .plane import GaussKernel, decode_plane, encode_heatmaps
from .types import DepthFrame, JointSetUVD, com_kernel

log = logging.getLogger(__name__)

MODES = ("full", "coordinate_unsupervised", "representation_unsupervised")
TRACE_COLUMNS = ("iteration", "L_uv", "L_d", "L_H", "L_D", "total")
DIVERGENCE_FACTOR = 1e3
STABLE_STEP = 0.3


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings.

    ``step_size`` scales each Gauss-Newton step. Traces are monotone for
    step sizes up to 0.3 (``STABLE_STEP``); from about 0.5 the early steps
    overshoot and the heatmap mass can collapse. ``max_score_step`` caps the
    largest score change per iteration; near-uniform heatmaps on large grids
    otherwise take wild first steps. ``grad_tol`` stops the run once the
    gradient norm falls below it.
    """

    mode: str = "full"
    step_size: float = 0.3
    max_iters: int = 2000
    seed: int = 0
    kernel_size: int = 7
    damping: float = 1e-8
    max_score_step: float = 1.0
    grad_tol: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"unknown fit mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if not self.step_size >= 0:
            raise ContractError("step_size must be nonnegative")
        if self.max_iters < 1:
            raise ContractError("max_iters must be at least 1")
        if not self.max_score_step > 0:
            raise ContractError("max_score_step must be positive")
        if not self.damping > 0:
            raise ContractError("damping must be positive")


def softmax(scores: np.ndarray) -> np.ndarray:
    flat = scores.reshape(scores.shape[0], -1)
    e = np.exp(flat - flat.max(axis=1, keepdims=True))
    return (e / e.sum(axis=1, keepdims=True)).reshape(scores.shape)


class FitProblem:
    """Objective and gradient for one frame and target pose."""

    def __init__(self, target: JointSetUVD, img: DepthFrame, mode: str = "full",
                 weights: LossWeights = LossWeights(), kernel: GaussKernel = GaussKernel(7)):
        if mode not in MODES:
            raise ContractError(f"unknown fit mode {mode!r}")
        self.n = img.resolution
        self.target = target
        self.img = img.values
        self.mask = build_mask(img)
        self.kernel = com_kernel(self.n)
        self.H_gt = encode_heatmaps(target.uv, self.n, kernel)
        self.D_gt = encode_depth_map(target.d, self.H_gt, self.img, self.mask)
        # undecodable targets fail here with UnsupportedJointError
        decode_depth(self.D_gt, self.H_gt, self.img, self.mask)
        coord = 0.0 if mode == "coordinate_unsupervised" else 1.0
        rep = 0.0 if mode == "representation_unsupervised" else 1.0
        self.c_uv = self.c_d = coord
        self.c_H = rep * weights.lambda_H
        self.c_D = rep * weights.lambda_D

    def representations(self, scores, offsets):
        return softmax(scores), offsets * self.mask

    def decode(self, H, D):
        uv = decode_plane(H, self.kernel)
        d = decode_depth(D, H, self.img, self.mask)
        return uv, np.atleast_1d(d)

    def evaluate(self, scores, offsets, with_step=False, damping=1e-8):
        """Return (parts, objective, grad wrt scores, grad wrt offsets).

        With ``with_step`` the damped Gauss-Newton direction for both
        variable groups is appended (see ``_newton_direction``).
        """
        H, D = self.representations(scores, offsets)
        uv, d = self.decode(H, D)
        r_uv = uv - self.target.uv
        r_d = d - self.target.d
        r_H = H - self.H_gt
        r_D = D - self.D_gt
        parts = {
            "uv": float(np.sum(r_uv**2)),
            "d": float(np.sum(r_d**2)),
            "H": float(np.sum(r_H**2)),
            "D": float(np.sum(r_D**2)),
        }
        objective = (self.c_uv * parts["uv"] + self.c_d * parts["d"]
                     + self.c_H * parts["H"] + self.c_D * parts["D"])

        m = self.mask
        den = np.sum(m * H, axis=(1, 2))[:, None, None]
        U, V = self.kernel[..., 0], self.kernel[..., 1]
        # d(decoded)/d(scores) and d(decoded depth)/d(offsets), per joint
        ju = H * (U - uv[:, 0, None, None])
        jv = H * (V - uv[:, 1, None, None])
        jd_s = H * m * ((self.img + D) - d[:, None, None]) / den
        jd_o = m * H / den

        g_H = 2 * self.c_H * r_H
        g_s = (2 * self.c_uv * (r_uv[:, 0, None, None] * ju + r_uv[:, 1, None, None] * jv)
               + 2 * self.c_d * r_d[:, None, None] * jd_s
               + H * (g_H - np.sum(H * g_H, axis=(1, 2), keepdims=True)))
        g_o = (2 * self.c_d * r_d[:, None, None] * jd_o + 2 * self.c_D * r_D) * m
        if not with_step:
            return parts, objective, g_s, g_o
        step = self._newton_direction(H, g_s, g_o, ju, jv, jd_s, jd_o, damping)
        return parts, objective, g_s, g_o, step

    def _newton_direction(self, H, g_s, g_o, ju, jv, jd_s, jd_o, damping):
        """Solve (G + damping * I) x = grad per joint, G the Gauss-Newton matrix.

        For a softmax heatmap, d(H)/d(scores) = diag(H) - H H^T, so the
        heatmap-loss block of G is diag(H^2) plus a rank-2 term. The three
        coordinate residuals add a rank-3 term. G is therefore diagonal plus
        rank 5 and the solve uses the Woodbury identity.
        """
        J, n, _ = H.shape

        def flat(s_part, o_part):
            return np.concatenate([s_part.reshape(J, -1), o_part.reshape(J, -1)], axis=1)

        zero = np.zeros_like(H)
        diag = flat(2 * self.c_H * H**2, np.broadcast_to(2 * self.c_D * self.mask, H.shape)) + damping
        U = np.stack([
            flat(H**2, zero),
            flat(H, zero),
            flat(ju, zero),
            flat(jv, zero),
            flat(jd_s, jd_o),
        ], axis=2)
        sq = np.sum(H**2, axis=(1, 2))
        core = np.zeros((J, 5, 5))
        core[:, 0, 1] = core[:, 1, 0] = -2 * self.c_H
        core[:, 1, 1] = 2 * self.c_H * sq
        core[:, 2, 2] = core[:, 3, 3] = 2 * self.c_uv
        core[:, 4, 4] = 2 * self.c_d

        # (D + U C U^T)^-1 = D^-1 - D^-1 U (I + C U^T D^-1 U)^-1 C U^T D^-1
        x = flat(g_s, g_o) / diag
        iu = U / diag[:, :, None]
        k = np.eye(5) + core @ np.swapaxes(U, 1, 2) @ iu
        rhs = core @ np.einsum("jpa,jp->ja", U, x)[..., None]
        x = x - np.einsum("jpa,ja->jp", iu, np.linalg.solve(k, rhs)[..., 0])
        return x[:, : n * n].reshape(H.shape), x[:, n * n:].reshape(H.shape)


@dataclass
class FitResult:
    heatmaps: np.ndarray
    depthmaps: np.ndarray
    decoded: np.ndarray
    trace: list = field(default_factory=list)
    iterations: int = 0

    def coordinate_error(self, target: JointSetUVD) -> float:
        """Largest absolute per-coordinate deviation from ``target``."""
        return float(np.max(np.abs(self.decoded - target.joints)))

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for row in self.trace:
                w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def initial_state(shape, seed: int):
    rng = np.random.default_rng(seed)
    scores = 0.01 * rng.standard_normal(shape)
    offsets = 0.01 * rng.standard_normal(shape)
    return scores, offsets


def fit_representation(target: JointSetUVD, img: DepthFrame, cfg: FitConfig = FitConfig(),
                       w: LossWeights = LossWeights()) -> FitResult:
    """Minimize the mode's objective over softmax scores and masked offsets.

    The trace holds one row per evaluated iterate: (iteration, L_uv, L_d,
    L_H, L_D, objective); all four parts are recorded in every mode. Raises
    DivergenceError if the objective exceeds 1e3 times its initial value.
    """
    problem = FitProblem(target, img, cfg.mode, w, GaussKernel(cfg.kernel_size))
    scores, offsets = initial_state((len(target), img.resolution, img.resolution), cfg.seed)
    trace = []
    initial = None
    it = 0
    for it in range(cfg.max_iters + 1):
        parts, obj, g_s, g_o, (d_s, d_o) = problem.evaluate(scores, offsets, True, cfg.damping)
        trace.append((it, parts["uv"], parts["d"], parts["H"], parts["D"], obj))
        if initial is None:
            initial = obj
        elif not np.isfinite(obj) or (initial > 0 and obj > DIVERGENCE_FACTOR * initial):
            raise DivergenceError(
                f"objective {obj:.3g} at iteration {it} exceeds {DIVERGENCE_FACTOR:g} x initial {initial:.3g}")
        if it == cfg.max_iters:
            break
        if cfg.grad_tol is not None and np.sqrt(np.sum(g_s**2) + np.sum(g_o**2)) <= cfg.grad_tol:
            break
        # trust region: no score moves by more than max_score_step per iteration
        scale = cfg.step_size * min(1.0, cfg.max_score_step / max(float(np.max(np.abs(d_s))), 1e-300))
        scores = scores - scale * d_s
        offsets = offsets - scale * d_o
    H, D = problem.representations(scores, offsets)
    uv, d = problem.decode(H, D)
    log.debug("fit %s stopped at iteration %d, objective %.3g", cfg.mode, it, trace[-1][-1])
    return FitResult(H, D, np.column_stack([uv, d]), trace, it)
