"""Numerical toolkit for geodesic Pre-Shape feature augmentation and
gradient-guided diffusion sampling, operating on file-backed tensors."""

from .contentloss import (
    LossWeights,
    loss_content,
    loss_feature_mse,
    loss_mse,
    loss_patch_contrastive,
    loss_psc,
    self_correlation,
)
from .diffusion import (
    GuidanceConfig,
    Schedule,
    build_schedule,
    ddim_invert,
    denoised_estimate,
    guided_step,
    q_sample,
    sample_loop,
    toy_predictor,
)
from .errors import FagstyleError
from .geodesic import (
    AugmentConfig,
    WeightSet,
    augment,
    curve_point,
    generate_weight_sets,
    surface_point,
)
from .grad import GradConfig, GradResult, fd_check, grad_eval
from .metrics import MetricReport, clip_score, psnr, ssim
from .preshape import PreShape, geodesic_distance, project, reshape_to_landmarks
from .styleloss import StyleInputs, loss_pc, loss_pd, loss_style
from .swc import PatchPlan, extract, plan
from .tensor import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig", "FagstyleError", "GradConfig", "GradResult",
    "GuidanceConfig", "LossWeights", "MetricReport", "PatchPlan", "PreShape",
    "Schedule", "StyleInputs", "WeightSet", "augment", "build_schedule",
    "clip_score", "curve_point", "ddim_invert", "denoised_estimate",
    "extract", "fd_check", "generate_weight_sets", "geodesic_distance",
    "grad_eval", "guided_step", "loss_content", "loss_feature_mse",
    "loss_mse", "loss_patch_contrastive", "loss_pc", "loss_pd", "loss_psc",
    "loss_style", "metrics", "plan", "project", "psnr", "q_sample",
    "read_tensor", "reshape_to_landmarks", "sample_loop", "self_correlation",
    "ssim", "surface_point", "toy_predictor", "write_tensor",
]
