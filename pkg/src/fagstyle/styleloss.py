"""Style control losses over augmented Pre-Shape features.

loss_pc averages the geodesic distance between each augmented target-patch
pre-shape and the projected target text feature.  loss_pd aligns directions:
per augmentation index, the difference between the target and source
augmented pre-shapes (as flat vectors) is compared against the projected
text-feature difference by cosine.  One weight-set list drives both feature
stacks inside a single evaluation, so the per-index pairs subtract like for
like.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._ops import (
    arc_distance_fwd,
    cosine_fwd,
    project_fwd,
    surface_fwd,
)
from .errors import DegenerateDirectionError, ShapeError
from .geodesic import AugmentConfig, generate_weight_sets
from .tensor import validate_tensor

# Direction vectors below this magnitude have no usable orientation.
DIRECTION_TOL = 1e-12


def _check_stack(tensors, names) -> list[np.ndarray]:
    """Validate a group of feature tensors: finite, equal even element counts."""
    arrs = [validate_tensor(t, n).astype(np.float64, copy=False) for t, n in zip(tensors, names)]
    size = arrs[0].size
    if size % 2 != 0:
        raise ShapeError(f"{names[0]}: element count {size} is odd")
    for a, n in zip(arrs, names):
        if a.size != size:
            raise ShapeError(f"{n}: element count {a.size} != {size}")
    return arrs


@dataclass(frozen=True)
class StyleInputs:
    """Everything one style-loss evaluation consumes, patch-index ordered."""

    target_patch_feats: tuple
    source_patch_feats: tuple
    tgt_text_feat: np.ndarray
    src_text_feat: np.ndarray
    aug_cfg: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self):
        tgt = tuple(self.target_patch_feats)
        src = tuple(self.source_patch_feats)
        if len(tgt) != len(src):
            raise ShapeError(f"patch lists differ in length: {len(tgt)} != {len(src)}")
        if len(tgt) < 2:
            raise ShapeError(f"need n >= 2 patches, got {len(tgt)}")
        names = [f"target_patch[{i}]" for i in range(len(tgt))]
        names += [f"source_patch[{i}]" for i in range(len(src))]
        names += ["tgt_text", "src_text"]
        arrs = _check_stack(list(tgt) + list(src) + [self.tgt_text_feat, self.src_text_feat], names)
        n = len(tgt)
        object.__setattr__(self, "target_patch_feats", tuple(arrs[:n]))
        object.__setattr__(self, "source_patch_feats", tuple(arrs[n : 2 * n]))
        object.__setattr__(self, "tgt_text_feat", arrs[-2])
        object.__setattr__(self, "src_text_feat", arrs[-1])

    @property
    def n(self) -> int:
        return len(self.target_patch_feats)


def _pc_forward(target_patches, tgt_text, aug_cfg: AugmentConfig, record: bool = False):
    """Returns (value, tape, clamp_hit); tape is None unless record."""
    names = [f"target_patch[{i}]" for i in range(len(target_patches))] + ["tgt_text"]
    arrs = _check_stack(list(target_patches) + [tgt_text], names)
    patches, text = arrs[:-1], arrs[-1]
    n = len(patches)
    if n < 2:
        raise ShapeError(f"need n >= 2 patches, got {n}")

    taus, proj_caches = [], []
    for f in patches:
        tau, cache = project_fwd(f)
        taus.append(tau)
        proj_caches.append(cache)
    tau_txt, txt_cache = project_fwd(text)

    wsets = generate_weight_sets(n, aug_cfg)
    dists, chains, heads = [], [], []
    clamp_hit = False
    for ws in wsets:
        mu, steps = surface_fwd(taus, ws.weights)
        d, head_cache, clamped = arc_distance_fwd(mu, tau_txt)
        clamp_hit = clamp_hit or clamped
        dists.append(d)
        chains.append(steps)
        heads.append(head_cache)
    value = float(np.mean(dists))
    tape = None
    if record:
        tape = {
            "proj_caches": proj_caches,
            "txt_cache": txt_cache,
            "taus": taus,
            "chains": chains,
            "heads": heads,
            "m": len(wsets),
            "n": n,
        }
    return value, tape, clamp_hit


def _pd_forward(target_patches, source_patches, tgt_text, src_text,
                aug_cfg: AugmentConfig, record: bool = False):
    if len(target_patches) != len(source_patches):
        raise ShapeError(
            f"patch lists differ in length: {len(target_patches)} != {len(source_patches)}"
        )
    n = len(target_patches)
    if n < 2:
        raise ShapeError(f"need n >= 2 patches, got {n}")
    names = [f"target_patch[{i}]" for i in range(n)]
    names += [f"source_patch[{i}]" for i in range(n)]
    names += ["tgt_text", "src_text"]
    arrs = _check_stack(
        list(target_patches) + list(source_patches) + [tgt_text, src_text], names
    )
    tgt_p, src_p = arrs[:n], arrs[n : 2 * n]
    t_txt, s_txt = arrs[-2], arrs[-1]

    taus_t, caches_t = zip(*(project_fwd(f) for f in tgt_p))
    taus_s, caches_s = zip(*(project_fwd(f) for f in src_p))
    tau_tt, cache_tt = project_fwd(t_txt)
    tau_ts, cache_ts = project_fwd(s_txt)

    dT = tau_tt.reshape(-1) - tau_ts.reshape(-1)
    if float(np.linalg.norm(dT)) <= DIRECTION_TOL:
        raise DegenerateDirectionError(
            "text direction has ~zero magnitude: the two prompts project identically"
        )

    wsets = generate_weight_sets(n, aug_cfg)
    terms, chains_t, chains_s, cos_caches = [], [], [], []
    for i, ws in enumerate(wsets):
        mu_t, steps_t = surface_fwd(list(taus_t), ws.weights)
        mu_s, steps_s = surface_fwd(list(taus_s), ws.weights)
        dI = mu_t.reshape(-1) - mu_s.reshape(-1)
        if float(np.linalg.norm(dI)) <= DIRECTION_TOL:
            raise DegenerateDirectionError(
                f"patch direction {i} has ~zero magnitude", index=i
            )
        c, ccache = cosine_fwd(dI, dT)
        terms.append(1.0 - c)
        chains_t.append(steps_t)
        chains_s.append(steps_s)
        cos_caches.append(ccache)
    value = float(np.mean(terms))
    tape = None
    if record:
        tape = {
            "caches_t": list(caches_t),
            "caches_s": list(caches_s),
            "cache_tt": cache_tt,
            "cache_ts": cache_ts,
            "taus_t": list(taus_t),
            "taus_s": list(taus_s),
            "chains_t": chains_t,
            "chains_s": chains_s,
            "cos_caches": cos_caches,
            "m": len(wsets),
            "n": n,
        }
    return value, tape, False


def loss_pc(inputs: StyleInputs) -> float:
    """Mean geodesic distance from augmented target pre-shapes to the target
    text pre-shape; lies in [0, pi]."""
    value, _, _ = _pc_forward(inputs.target_patch_feats, inputs.tgt_text_feat, inputs.aug_cfg)
    return value


def loss_pd(inputs: StyleInputs) -> float:
    """Mean (1 - cosine) between per-index augmented-feature deltas and the
    text delta; lies in [0, 2]."""
    value, _, _ = _pd_forward(
        inputs.target_patch_feats,
        inputs.source_patch_feats,
        inputs.tgt_text_feat,
        inputs.src_text_feat,
        inputs.aug_cfg,
    )
    return value


def loss_style(inputs: StyleInputs, weights) -> float:
    """lambda_pc * loss_pc + lambda_pd * loss_pd.

    Components with a zero weight are skipped entirely, so they can neither
    fail nor contribute.
    """
    total = 0.0
    if weights.lambda_pc != 0.0:
        total += weights.lambda_pc * loss_pc(inputs)
    if weights.lambda_pd != 0.0:
        total += weights.lambda_pd * loss_pd(inputs)
    return total
