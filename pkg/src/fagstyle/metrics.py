"""Evaluation metrics: PSNR, single-scale SSIM, and embedding cosine scores.

SSIM uses the canonical configuration (11 x 11 Gaussian window, sigma 1.5,
K1 = 0.01, K2 = 0.03, valid-mode windowing) averaged over channels.  PSNR
returns +inf for identical images; report serialization renders that as the
sentinel string "identical".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateFeatureError, ShapeError
from .tensor import validate_tensor

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricReport:
    psnr: float | None = None
    ssim: float | None = None
    clip_i: float | None = None
    clip_p: float | None = None
    clip_p_patch_side: int | None = None

    def as_dict(self) -> dict:
        out = {}
        if self.psnr is not None:
            out["psnr"] = "identical" if math.isinf(self.psnr) else self.psnr
        if self.ssim is not None:
            out["ssim"] = self.ssim
        if self.clip_i is not None:
            out["clip_i"] = self.clip_i
        if self.clip_p is not None:
            out["clip_p"] = self.clip_p
            out["clip_p_patch_side"] = self.clip_p_patch_side
        return out


def _pair(a, b):
    x = validate_tensor(a, "a").astype(np.float64, copy=False)
    y = validate_tensor(b, "b").astype(np.float64, copy=False)
    if x.shape != y.shape:
        raise ShapeError(f"shapes differ: {x.shape} != {y.shape}")
    return x, y


def psnr(a, b, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); +inf when the images are identical."""
    if peak <= 0 or not np.isfinite(peak):
        raise ConfigError(f"peak must be > 0, got {peak!r}")
    x, y = _pair(a, b)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return float(10.0 * np.log10(peak * peak / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    xs = np.arange(size) - half
    w = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return w / w.sum()


def _conv_valid_axis(x: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(x, kernel.size, axis=axis)
    return win @ kernel


def _filter2(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return _conv_valid_axis(_conv_valid_axis(x, kernel, axis=-2), kernel, axis=-1)


def ssim(a, b, peak: float = 1.0) -> float:
    """Single-scale structural similarity, channel-averaged."""
    if peak <= 0 or not np.isfinite(peak):
        raise ConfigError(f"peak must be > 0, got {peak!r}")
    x, y = _pair(a, b)
    if x.ndim == 2:
        x = x[None]
        y = y[None]
    if x.ndim != 3:
        raise ShapeError(f"images must be HxW or cxHxW, got {x.shape}")
    _, h, w = x.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ConfigError(f"image {h} x {w} smaller than the {SSIM_WINDOW}-pixel window")
    kern = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_x = _filter2(x, kern)
    mu_y = _filter2(y, kern)
    sxx = _filter2(x * x, kern) - mu_x * mu_x
    syy = _filter2(y * y, kern) - mu_y * mu_y
    sxy = _filter2(x * y, kern) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu <= 1e-300 or nv <= 1e-300:
        raise DegenerateFeatureError("zero-norm embedding")
    return float(np.dot(u, v) / (nu * nv))


def clip_score(image_feats, text_feat) -> float:
    """Cosine between embeddings; a list of patch embeddings is averaged.

    Whole-image input gives the CLIP-I convention, a patch list gives
    CLIP-P (the patches themselves are produced externally on 64 x 64
    crops by default).
    """
    t = validate_tensor(text_feat, "text_feat").astype(np.float64, copy=False).reshape(-1)
    if isinstance(image_feats, (list, tuple)):
        if not image_feats:
            raise ShapeError("empty patch list")
        scores = []
        for i, f in enumerate(image_feats):
            v = validate_tensor(f, f"patch_feat[{i}]").astype(np.float64, copy=False).reshape(-1)
            if v.size != t.size:
                raise ShapeError(f"patch_feat[{i}] length {v.size} != text {t.size}")
            scores.append(_cosine(v, t))
        return float(np.mean(scores))
    v = validate_tensor(image_feats, "image_feat").astype(np.float64, copy=False).reshape(-1)
    if v.size != t.size:
        raise ShapeError(f"image_feat length {v.size} != text {t.size}")
    return _cosine(v, t)
