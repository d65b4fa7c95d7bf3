"""Central finite-difference checks of the analytic decoder and loss gradients."""

from __future__ import annotations

import numpy as np

from .depth import build_mask, decode_depth, decode_depth_jacobian
from .fit import MODES, FitProblem
from .plane import GaussKernel, decode_plane, decode_plane_jacobian
from .types import DepthFrame, JointSetUVD


def central_difference(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` (any shape) by central differences."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * step)
    return g


def relative_error(analytic, numeric) -> float:
    """max |a - f| scaled by the larger of the two gradients' max-norms."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-300)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def random_instance(rng: np.random.Generator, n: int = 8, n_joints: int = 2):
    """Random frame with roughly 70% on-hand pixels and random positive heatmaps/offsets."""
    img = rng.uniform(0.2, 0.9, (n, n)) * (rng.random((n, n)) < 0.7)
    img[rng.integers(n), rng.integers(n)] = 0.5
    h = rng.random((n_joints, n, n)) + 0.05
    h /= h.sum(axis=(1, 2), keepdims=True)
    m = build_mask(img)
    d = rng.normal(0.0, 0.1, (n_joints, n, n)) * m
    return img, h, d, m


def check_plane(h: np.ndarray, step: float) -> float:
    worst = 0.0
    jac = decode_plane_jacobian(h)
    for c in range(2):
        num = central_difference(lambda x: decode_plane(x)[c], h, step)
        worst = max(worst, relative_error(jac[..., c], num))
    return worst


def check_depth(d, h, img, m, step: float) -> float:
    worst = 0.0
    g_d, g_h = decode_depth_jacobian(d, h, img, m)
    num_d = central_difference(lambda x: decode_depth(x, h, img, m), d, step)
    num_h = central_difference(lambda x: decode_depth(d, x, img, m), h, step)
    worst = max(worst, relative_error(g_d, num_d), relative_error(g_h, num_h))
    return worst


def check_objective(rng, img, n_joints: int, step: float) -> float:
    """Objective gradient of every fit mode against central differences."""
    n = img.shape[0]
    frame = DepthFrame(img)
    worst = 0.0
    for mode in MODES:
        while True:
            uv = rng.uniform(0.5 / n, 1 - 0.5 / n, (n_joints, 2))
            target = JointSetUVD(np.column_stack([uv, rng.uniform(0.2, 0.9, n_joints)]))
            try:
                problem = FitProblem(target, frame, mode, kernel=GaussKernel(3))
                break
            except ValueError:
                continue
        scores = rng.normal(0, 1.0, (n_joints, n, n))
        offsets = rng.normal(0, 0.1, (n_joints, n, n))
        _, _, g_s, g_o = problem.evaluate(scores, offsets)
        num_s = central_difference(lambda x: problem.evaluate(x, offsets)[1], scores, step)
        num_o = central_difference(lambda x: problem.evaluate(scores, x)[1], offsets, step)
        worst = max(worst, relative_error(g_s, num_s), relative_error(g_o, num_o))
    return worst


def check_instances(seed: int, instances: int, n: int = 8, n_joints: int = 2, step: float = 1e-5,
                    objective: bool = True) -> dict:
    """Worst relative error per gradient family over ``instances`` random instances."""
    rng = np.random.default_rng(seed)
    report = {"plane_jacobian": 0.0, "depth_jacobian": 0.0}
    if objective:
        report["fit_objective_gradient"] = 0.0
    for _ in range(instances):
        img, h, d, m = random_instance(rng, n, n_joints)
        for j in range(n_joints):
            report["plane_jacobian"] = max(report["plane_jacobian"], check_plane(h[j], step))
            report["depth_jacobian"] = max(report["depth_jacobian"], check_depth(d[j], h[j], img, m, step))
        if objective:
            report["fit_objective_gradient"] = max(report["fit_objective_gradient"],
                                                   check_objective(rng, img, n_joints, step))
    return report
