"""Heatmap and local offset depth-map codecs for 3D hand joints, with
differentiable decoders, losses, preprocessing, synthetic data and metrics."""

from .depth import build_mask, decode_depth, decode_depth_jacobian, encode_depth_map
from .errors import (ContractError, DegenerateHeatmapError, DivergenceError, EmptyCropError, EmptyHandError,
                     OutOfHullError, SFRError, UnsupportedJointError)
from .fit import FitConfig, FitResult, fit_representation
from .losses import LossWeights, loss_d, loss_depthmap, loss_heatmap, loss_uv, stage_loss, total_loss
from .metrics import frames_under_threshold, mean_3d_error, uvd_to_xyz, xyz_to_uvd
from .plane import (GaussKernel, boundary_proximate, decode_plane, decode_plane_jacobian, encode_corners,
                    encode_heatmap, gauss_smooth, touches_border)
from .types import (CameraIntrinsics, CropBox, DepthFrame, JointSetUVD, NormalizationCube, com_kernel,
                    pixel_center)

__version__ = "0.1.0"
