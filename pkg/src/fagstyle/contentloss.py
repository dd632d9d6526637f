"""Content control losses: self-correlation consistency, pixel / feature-map
MSE, and the patch contrastive term, combined by fixed weights.

The self-correlation path projects each layer tensor onto the Pre-Shape
constraints while keeping its c x h x w layout, normalizes every per-position
channel vector, and compares the two correlation structures row by row with
smooth-l1 (mean within a row, summed over rows and layers).  Rows are
processed in blocks so the (hw)^2 correlation object is never materialized
whole for large maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._ops import project_keep_fwd, smooth_l1, smooth_l1_grad
from .errors import ConfigError, DegenerateFeatureError, ShapeError
from .tensor import validate_tensor

# Channel vectors below this norm cannot be cosine-compared.
FEATURE_TOL = 1e-12

# Row-block size for streaming the correlation matrices.
_BLOCK = 1024


@dataclass(frozen=True)
class LossWeights:
    """The seven hyperparameters of the combined objective (defaults are the
    published operating point)."""

    lambda_pc: float = 20000.0
    lambda_pd: float = 20000.0
    lambda_ps: float = 1000.0
    lambda_z: float = 1000.0
    lambda_v: float = 1000.0
    lambda_m: float = 100.0
    n: int = 49

    def __post_init__(self):
        for name in ("lambda_pc", "lambda_pd", "lambda_ps", "lambda_z", "lambda_v", "lambda_m"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v!r}")
        if self.n < 1:
            raise ConfigError(f"patch count n must be >= 1, got {self.n}")


def _check_layer(t, name) -> np.ndarray:
    a = validate_tensor(t, name).astype(np.float64, copy=False)
    if a.ndim != 3:
        raise ShapeError(f"{name}: layer features must be c x h x w, got {a.shape}")
    return a


def _check_layer_stacks(src, tgt):
    if len(src) == 0 or len(tgt) == 0:
        raise ShapeError("layer list must be non-empty")
    if len(src) != len(tgt):
        raise ShapeError(f"layer counts differ: {len(src)} != {len(tgt)}")
    out_s, out_t = [], []
    for l, (a, b) in enumerate(zip(src, tgt)):
        a = _check_layer(a, f"source_layer[{l}]")
        b = _check_layer(b, f"target_layer[{l}]")
        if a.shape != b.shape:
            raise ShapeError(f"layer {l} shapes differ: {a.shape} != {b.shape}")
        out_s.append(a)
        out_t.append(b)
    return out_s, out_t


def _normalized_positions(z: np.ndarray, name: str):
    """Column-normalize the (c, hw) view of a feature map."""
    c = z.shape[0]
    flat = z.reshape(c, -1)
    norms = np.linalg.norm(flat, axis=0)
    if np.any(norms <= FEATURE_TOL):
        pos = int(np.argmin(norms))
        raise DegenerateFeatureError(f"{name}: ~zero channel vector at position {pos}")
    return flat / norms, flat, norms


def self_correlation(z, position) -> np.ndarray:
    """Cosine similarities between the channel vector at ``position`` and the
    vectors at every position of a projected c x h x w feature map."""
    a = _check_layer(z, "feature map")
    _, h, w = a.shape
    u, v = position
    if not (0 <= u < h and 0 <= v < w):
        raise ShapeError(f"position {position} outside {h} x {w} map")
    n, _, _ = _normalized_positions(a, "feature map")
    row = n[:, u * w + v] @ n
    return row.reshape(h, w)


def _psc_forward(src_layers, tgt_layers, record: bool = False):
    src_layers, tgt_layers = _check_layer_stacks(src_layers, tgt_layers)
    total = 0.0
    tapes = []
    for l, (zs_raw, zt_raw) in enumerate(zip(src_layers, tgt_layers)):
        zs, cache_s = project_keep_fwd(zs_raw)
        zt, cache_t = project_keep_fwd(zt_raw)
        ns, flat_s, norm_s = _normalized_positions(zs, f"source_layer[{l}]")
        nt, flat_t, norm_t = _normalized_positions(zt, f"target_layer[{l}]")
        hw = ns.shape[1]
        layer_sum = 0.0
        for start in range(0, hw, _BLOCK):
            rows = slice(start, min(start + _BLOCK, hw))
            cs = ns[:, rows].T @ ns
            ct = nt[:, rows].T @ nt
            layer_sum += float(np.sum(smooth_l1(ct - cs)))
        total += layer_sum / hw
        if record:
            tapes.append({
                "cache_s": cache_s, "cache_t": cache_t,
                "ns": ns, "nt": nt,
                "flat_s": flat_s, "flat_t": flat_t,
                "norm_s": norm_s, "norm_t": norm_t,
                "shape": zs.shape, "hw": hw,
            })
    return total, (tapes if record else None), False


def loss_psc(src, tgt) -> float:
    """Pre-Shape self-correlation consistency across selected layers."""
    value, _, _ = _psc_forward(src, tgt)
    return value


def _mse_forward(a, b, record: bool = False):
    x = validate_tensor(a, "a").astype(np.float64, copy=False)
    y = validate_tensor(b, "b").astype(np.float64, copy=False)
    if x.shape != y.shape:
        raise ShapeError(f"shapes differ: {x.shape} != {y.shape}")
    diff = x - y
    value = float(np.mean(diff * diff))
    return value, ({"diff": diff, "size": x.size} if record else None), False


def loss_mse(a, b) -> float:
    """Mean squared difference over all elements."""
    value, _, _ = _mse_forward(a, b)
    return value


def _feature_mse_forward(src_layers, tgt_layers, record: bool = False):
    src_layers, tgt_layers = _check_layer_stacks(src_layers, tgt_layers)
    n_layers = len(src_layers)
    value = 0.0
    tapes = []
    for zs, zt in zip(src_layers, tgt_layers):
        diff = zs - zt
        value += float(np.mean(diff * diff))
        if record:
            tapes.append({"diff": diff, "size": zs.size})
    value /= n_layers
    return value, (tapes if record else None), False


def loss_feature_mse(src, tgt) -> float:
    """Mean over layers of the per-layer elementwise MSE."""
    value, _, _ = _feature_mse_forward(src, tgt)
    return value


def _contrastive_forward(src_patches, tgt_patches, temperature, record: bool = False):
    if temperature is None or not np.isfinite(temperature) or temperature <= 0:
        raise ConfigError(f"temperature must be > 0, got {temperature!r}")
    if len(src_patches) != len(tgt_patches):
        raise ShapeError(
            f"patch counts differ: {len(src_patches)} != {len(tgt_patches)}"
        )
    if len(src_patches) < 1:
        raise ShapeError("need at least one patch")
    K = np.stack([
        validate_tensor(p, f"source_patch[{j}]").astype(np.float64, copy=False).reshape(-1)
        for j, p in enumerate(src_patches)
    ])
    Q = np.stack([
        validate_tensor(p, f"target_patch[{i}]").astype(np.float64, copy=False).reshape(-1)
        for i, p in enumerate(tgt_patches)
    ])
    if Q.shape[1] != K.shape[1]:
        raise ShapeError(f"feature lengths differ: {Q.shape[1]} != {K.shape[1]}")
    qn = np.linalg.norm(Q, axis=1)
    kn = np.linalg.norm(K, axis=1)
    if np.any(qn <= FEATURE_TOL) or np.any(kn <= FEATURE_TOL):
        raise DegenerateFeatureError("~zero-norm patch feature")
    Qn = Q / qn[:, None]
    Kn = K / kn[:, None]
    cos = Qn @ Kn.T
    logits = cos / temperature
    shift = logits.max(axis=1, keepdims=True)
    lse = shift[:, 0] + np.log(np.sum(np.exp(logits - shift), axis=1))
    per_i = lse - np.diagonal(logits)
    value = float(np.mean(per_i))
    tape = None
    if record:
        tape = {
            "Q": Q, "K": K, "Qn": Qn, "Kn": Kn, "qn": qn, "kn": kn,
            "cos": cos, "logits": logits, "lse": lse,
            "temperature": float(temperature),
        }
    return value, tape, False


def loss_patch_contrastive(src_patches, tgt_patches, temperature: float = 0.07) -> float:
    """InfoNCE over in-image patches: positives pair index-to-index, the rest
    of the source patches act as negatives; logits are cosine / temperature."""
    value, _, _ = _contrastive_forward(src_patches, tgt_patches, temperature)
    return value


def loss_content(
    *,
    weights: LossWeights,
    psc_src=None,
    psc_tgt=None,
    vgg_src=None,
    vgg_tgt=None,
    image_src=None,
    image_tgt=None,
    zecon_src=None,
    zecon_tgt=None,
    temperature: float = 0.07,
) -> float:
    """Weighted sum of the four content terms.

    A component is evaluated only when its weight is nonzero; its inputs must
    then be present.
    """
    total = 0.0
    if weights.lambda_ps != 0.0:
        if psc_src is None or psc_tgt is None:
            raise ConfigError("lambda_ps != 0 but self-correlation layers are missing")
        total += weights.lambda_ps * loss_psc(psc_src, psc_tgt)
    if weights.lambda_z != 0.0:
        if zecon_src is None or zecon_tgt is None:
            raise ConfigError("lambda_z != 0 but contrastive patches are missing")
        total += weights.lambda_z * loss_patch_contrastive(zecon_src, zecon_tgt, temperature)
    if weights.lambda_v != 0.0:
        if vgg_src is None or vgg_tgt is None:
            raise ConfigError("lambda_v != 0 but feature-map layers are missing")
        total += weights.lambda_v * loss_feature_mse(vgg_src, vgg_tgt)
    if weights.lambda_m != 0.0:
        if image_src is None or image_tgt is None:
            raise ConfigError("lambda_m != 0 but pixel images are missing")
        total += weights.lambda_m * loss_mse(image_src, image_tgt)
    return total
