"""Analytic gradients of every loss with respect to its raw input tensors,
plus an independent central finite-difference checker.

grad_eval re-runs the loss forward with tape recording and then walks the
tape backwards through the hand-written pullbacks in ``_ops``; its reported
value is produced by the very same forward code the plain loss ops use, so
the two are bit-identical.  Inputs are passed as a dict keyed by role:

    pc                 target_patches, tgt_text
    pd / style         target_patches, source_patches, tgt_text, src_text
    psc / feature_mse  source_layers, target_layers
    mse                source_image, target_image
    patch_contrastive  source_patches, target_patches
    content            psc_source_layers, psc_target_layers,
                       vgg_source_layers, vgg_target_layers,
                       source_image, target_image,
                       source_patches, target_patches
    total              union of style and content keys (the patch features
                       feed both the style terms and the contrastive term)

List-valued inputs produce one gradient entry per element under the key
"<name>.<index>".  Inputs present but unused by the requested loss get
zero gradients.  arccos clamp boundaries use the zero sub-gradient and are
flagged on the result so callers can exclude those points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _ops
from .contentloss import (
    LossWeights,
    _contrastive_forward,
    _feature_mse_forward,
    _mse_forward,
    _psc_forward,
)
from .errors import ConfigError
from .geodesic import AugmentConfig
from .styleloss import _pc_forward, _pd_forward

LOSS_IDS = (
    "pc", "pd", "psc", "mse", "feature_mse", "patch_contrastive",
    "style", "content", "total",
)

_STYLE_KEYS = ("target_patches", "source_patches", "tgt_text", "src_text")
_CONTENT_KEYS = (
    "psc_source_layers", "psc_target_layers",
    "vgg_source_layers", "vgg_target_layers",
    "source_image", "target_image",
    "source_patches", "target_patches",
)

INPUT_KEYS = {
    "pc": ("target_patches", "tgt_text"),
    "pd": _STYLE_KEYS,
    "style": _STYLE_KEYS,
    "psc": ("source_layers", "target_layers"),
    "mse": ("source_image", "target_image"),
    "feature_mse": ("source_layers", "target_layers"),
    "patch_contrastive": ("source_patches", "target_patches"),
    "content": _CONTENT_KEYS,
    "total": tuple(dict.fromkeys(_STYLE_KEYS + _CONTENT_KEYS)),
}

_LIST_KEYS = {
    "target_patches", "source_patches", "source_layers", "target_layers",
    "psc_source_layers", "psc_target_layers", "vgg_source_layers", "vgg_target_layers",
}


@dataclass(frozen=True)
class GradConfig:
    aug: AugmentConfig = field(default_factory=AugmentConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    temperature: float = 0.07


@dataclass
class GradResult:
    value: float
    grads: dict
    clamp_boundary: bool = False


def _zero_grads(inputs, keys) -> dict:
    out = {}
    for key in keys:
        if key not in inputs:
            continue
        if key in _LIST_KEYS:
            for i, a in enumerate(inputs[key]):
                out[f"{key}.{i}"] = np.zeros_like(np.asarray(a, dtype=np.float64))
        else:
            out[key] = np.zeros_like(np.asarray(inputs[key], dtype=np.float64))
    return out


def _accumulate(dst: dict, src: dict, scale: float = 1.0):
    for k, v in src.items():
        if k in dst:
            dst[k] = dst[k] + scale * v
        else:
            dst[k] = scale * v


# -- per-loss backward passes -------------------------------------------------

def _grad_pc(inputs, cfg):
    value, tape, clamp = _pc_forward(
        inputs["target_patches"], inputs["tgt_text"], cfg.aug, record=True
    )
    n, m = tape["n"], tape["m"]
    shape2k = tape["taus"][0].shape
    taubars = [np.zeros(shape2k) for _ in range(n)]
    txtbar = np.zeros(shape2k)
    for i in range(m):
        mubar, tbar = _ops.arc_distance_vjp(tape["heads"][i], 1.0 / m)
        txtbar += tbar
        for j, g in enumerate(_ops.surface_vjp(tape["chains"][i], mubar, n)):
            if g is not None:
                taubars[j] += g
    grads = {}
    for j in range(n):
        grads[f"target_patches.{j}"] = _ops.project_vjp(tape["proj_caches"][j], taubars[j])
    grads["tgt_text"] = _ops.project_vjp(tape["txt_cache"], txtbar)
    return value, grads, clamp


def _grad_pd(inputs, cfg):
    value, tape, clamp = _pd_forward(
        inputs["target_patches"], inputs["source_patches"],
        inputs["tgt_text"], inputs["src_text"], cfg.aug, record=True,
    )
    n, m = tape["n"], tape["m"]
    shape2k = tape["taus_t"][0].shape
    taubars_t = [np.zeros(shape2k) for _ in range(n)]
    taubars_s = [np.zeros(shape2k) for _ in range(n)]
    dTbar = np.zeros(shape2k[0] * shape2k[1])
    for i in range(m):
        dIbar, dTbar_i = _ops.cosine_vjp(tape["cos_caches"][i], -1.0 / m)
        dTbar += dTbar_i
        mu_t_bar = dIbar.reshape(shape2k)
        mu_s_bar = -dIbar.reshape(shape2k)
        for j, g in enumerate(_ops.surface_vjp(tape["chains_t"][i], mu_t_bar, n)):
            if g is not None:
                taubars_t[j] += g
        for j, g in enumerate(_ops.surface_vjp(tape["chains_s"][i], mu_s_bar, n)):
            if g is not None:
                taubars_s[j] += g
    grads = {}
    for j in range(n):
        grads[f"target_patches.{j}"] = _ops.project_vjp(tape["caches_t"][j], taubars_t[j])
        grads[f"source_patches.{j}"] = _ops.project_vjp(tape["caches_s"][j], taubars_s[j])
    dT2k = dTbar.reshape(shape2k)
    grads["tgt_text"] = _ops.project_vjp(tape["cache_tt"], dT2k)
    grads["src_text"] = _ops.project_vjp(tape["cache_ts"], -dT2k)
    return value, grads, clamp


def _grad_psc(inputs, cfg, src_key="source_layers", tgt_key="target_layers"):
    value, tapes, _ = _psc_forward(inputs[src_key], inputs[tgt_key], record=True)
    grads = {}
    for l, tape in enumerate(tapes):
        ns, nt = tape["ns"], tape["nt"]
        hw = tape["hw"]
        ns_bar = np.zeros_like(ns)
        nt_bar = np.zeros_like(nt)
        block = 1024
        for start in range(0, hw, block):
            rows = slice(start, min(start + block, hw))
            cs = ns[:, rows].T @ ns
            ct = nt[:, rows].T @ nt
            g = _ops.smooth_l1_grad(ct - cs) / hw
            # C = N^T N  =>  N_bar = N (C_bar + C_bar^T); C_bar rows `rows` = g
            nt_bar += nt[:, rows] @ g
            nt_bar[:, rows] += nt @ g.T
            ns_bar -= ns[:, rows] @ g
            ns_bar[:, rows] -= ns @ g.T
        for bar, n_mat, norms, cache, key in (
            (ns_bar, ns, tape["norm_s"], tape["cache_s"], f"{src_key}.{l}"),
            (nt_bar, nt, tape["norm_t"], tape["cache_t"], f"{tgt_key}.{l}"),
        ):
            flat_bar = (bar - n_mat * np.sum(bar * n_mat, axis=0)) / norms
            grads[key] = _ops.project_keep_vjp(cache, flat_bar.reshape(tape["shape"]))
    return value, grads, False


def _grad_mse(inputs, cfg, a_key="source_image", b_key="target_image"):
    value, tape, _ = _mse_forward(inputs[a_key], inputs[b_key], record=True)
    g = 2.0 * tape["diff"] / tape["size"]
    return value, {a_key: g, b_key: -g}, False


def _grad_feature_mse(inputs, cfg, src_key="source_layers", tgt_key="target_layers"):
    value, tapes, _ = _feature_mse_forward(inputs[src_key], inputs[tgt_key], record=True)
    grads = {}
    n_layers = len(tapes)
    for l, tape in enumerate(tapes):
        g = 2.0 * tape["diff"] / (tape["size"] * n_layers)
        grads[f"{src_key}.{l}"] = g
        grads[f"{tgt_key}.{l}"] = -g
    return value, grads, False


def _grad_contrastive(inputs, cfg):
    src = inputs["source_patches"]
    tgt = inputs["target_patches"]
    value, tape, _ = _contrastive_forward(src, tgt, cfg.temperature, record=True)
    Qn, Kn, qn, kn = tape["Qn"], tape["Kn"], tape["qn"], tape["kn"]
    n = Qn.shape[0]
    logits, lse = tape["logits"], tape["lse"]
    probs = np.exp(logits - lse[:, None])
    g_logits = (probs - np.eye(n)) / n
    g_cos = g_logits / tape["temperature"]
    Qn_bar = g_cos @ Kn
    Kn_bar = g_cos.T @ Qn
    Q_bar = (Qn_bar - Qn * np.sum(Qn_bar * Qn, axis=1, keepdims=True)) / qn[:, None]
    K_bar = (Kn_bar - Kn * np.sum(Kn_bar * Kn, axis=1, keepdims=True)) / kn[:, None]
    grads = {}
    for i in range(n):
        grads[f"target_patches.{i}"] = Q_bar[i].reshape(np.asarray(tgt[i]).shape)
        grads[f"source_patches.{i}"] = K_bar[i].reshape(np.asarray(src[i]).shape)
    return value, grads, False


def _grad_style(inputs, cfg):
    w = cfg.weights
    value = 0.0
    grads = {}
    clamp = False
    if w.lambda_pc != 0.0:
        v, g, c = _grad_pc(inputs, cfg)
        value += w.lambda_pc * v
        clamp = clamp or c
        _accumulate(grads, g, w.lambda_pc)
    if w.lambda_pd != 0.0:
        v, g, c = _grad_pd(inputs, cfg)
        value += w.lambda_pd * v
        clamp = clamp or c
        _accumulate(grads, g, w.lambda_pd)
    return value, grads, clamp


def _grad_content(inputs, cfg):
    w = cfg.weights
    value = 0.0
    grads = {}
    if w.lambda_ps != 0.0:
        v, g, _ = _grad_psc(inputs, cfg, "psc_source_layers", "psc_target_layers")
        value += w.lambda_ps * v
        _accumulate(grads, g, w.lambda_ps)
    if w.lambda_z != 0.0:
        v, g, _ = _grad_contrastive(inputs, cfg)
        value += w.lambda_z * v
        _accumulate(grads, g, w.lambda_z)
    if w.lambda_v != 0.0:
        v, g, _ = _grad_feature_mse(inputs, cfg, "vgg_source_layers", "vgg_target_layers")
        value += w.lambda_v * v
        _accumulate(grads, g, w.lambda_v)
    if w.lambda_m != 0.0:
        v, g, _ = _grad_mse(inputs, cfg, "source_image", "target_image")
        value += w.lambda_m * v
        _accumulate(grads, g, w.lambda_m)
    return value, grads, False


def _grad_total(inputs, cfg):
    v_sty, g_sty, clamp = _grad_style(inputs, cfg)
    v_con, g_con, _ = _grad_content(inputs, cfg)
    grads = dict(g_sty)
    _accumulate(grads, g_con)
    return v_sty + v_con, grads, clamp


_DISPATCH = {
    "pc": _grad_pc,
    "pd": _grad_pd,
    "psc": _grad_psc,
    "mse": _grad_mse,
    "feature_mse": _grad_feature_mse,
    "patch_contrastive": _grad_contrastive,
    "style": _grad_style,
    "content": _grad_content,
    "total": _grad_total,
}


def grad_eval(loss_id: str, inputs: dict, config: GradConfig | None = None) -> GradResult:
    """Evaluate the named loss and its gradients with respect to every
    present input tensor."""
    if loss_id not in _DISPATCH:
        raise ConfigError(f"unknown loss id {loss_id!r}; valid: {LOSS_IDS}")
    cfg = config if config is not None else GradConfig()
    value, grads, clamp = _DISPATCH[loss_id](inputs, cfg)
    full = _zero_grads(inputs, INPUT_KEYS[loss_id])
    _accumulate(full, grads)
    return GradResult(value=float(value), grads=full, clamp_boundary=clamp)


def loss_value(loss_id: str, inputs: dict, config: GradConfig | None = None) -> float:
    """Value-only evaluation through the plain forward paths (no tape)."""
    cfg = config if config is not None else GradConfig()
    if loss_id == "pc":
        return _pc_forward(inputs["target_patches"], inputs["tgt_text"], cfg.aug)[0]
    if loss_id == "pd":
        return _pd_forward(
            inputs["target_patches"], inputs["source_patches"],
            inputs["tgt_text"], inputs["src_text"], cfg.aug,
        )[0]
    if loss_id == "psc":
        return _psc_forward(inputs["source_layers"], inputs["target_layers"])[0]
    if loss_id == "mse":
        return _mse_forward(inputs["source_image"], inputs["target_image"])[0]
    if loss_id == "feature_mse":
        return _feature_mse_forward(inputs["source_layers"], inputs["target_layers"])[0]
    if loss_id == "patch_contrastive":
        return _contrastive_forward(
            inputs["source_patches"], inputs["target_patches"], cfg.temperature
        )[0]
    if loss_id == "style":
        w = cfg.weights
        total = 0.0
        if w.lambda_pc != 0.0:
            total += w.lambda_pc * loss_value("pc", inputs, cfg)
        if w.lambda_pd != 0.0:
            total += w.lambda_pd * loss_value("pd", inputs, cfg)
        return total
    if loss_id == "content":
        w = cfg.weights
        total = 0.0
        if w.lambda_ps != 0.0:
            total += w.lambda_ps * _psc_forward(
                inputs["psc_source_layers"], inputs["psc_target_layers"]
            )[0]
        if w.lambda_z != 0.0:
            total += w.lambda_z * _contrastive_forward(
                inputs["source_patches"], inputs["target_patches"], cfg.temperature
            )[0]
        if w.lambda_v != 0.0:
            total += w.lambda_v * _feature_mse_forward(
                inputs["vgg_source_layers"], inputs["vgg_target_layers"]
            )[0]
        if w.lambda_m != 0.0:
            total += w.lambda_m * _mse_forward(
                inputs["source_image"], inputs["target_image"]
            )[0]
        return total
    if loss_id == "total":
        return loss_value("style", inputs, cfg) + loss_value("content", inputs, cfg)
    raise ConfigError(f"unknown loss id {loss_id!r}")


def seeded_inputs(loss_id: str, seed: int = 0, n_patches: int = 4,
                  feat_size: int = 16) -> dict:
    """Small seeded random inputs for gradcheck runs and FD sweeps.

    Target-side tensors are source-side tensors plus an independent
    perturbation, so direction vectors never degenerate.
    """
    if loss_id not in _DISPATCH:
        raise ConfigError(f"unknown loss id {loss_id!r}; valid: {LOSS_IDS}")
    rng = np.random.default_rng(seed)
    layer_shapes = [(3, 2, 2), (2, 3, 3)]

    def patches():
        return [rng.normal(size=feat_size) for _ in range(n_patches)]

    def layers():
        return [rng.normal(size=s) for s in layer_shapes]

    def offset(arrs, scale=0.35):
        return [a + scale * rng.normal(size=a.shape) for a in arrs]

    # independent target draws keep the contrastive softmax away from
    # saturation, where central differences lose all their digits
    src_patches = patches()
    tgt_patches = patches()
    src_text = rng.normal(size=feat_size)
    tgt_text = src_text + 0.5 * rng.normal(size=feat_size)
    image = rng.normal(size=(3, 4, 4))
    image_tgt = image + 0.3 * rng.normal(size=image.shape)

    inputs = {
        "target_patches": tgt_patches,
        "source_patches": src_patches,
        "tgt_text": tgt_text,
        "src_text": src_text,
        "source_layers": layers(),
        "source_image": image,
        "target_image": image_tgt,
    }
    inputs["target_layers"] = offset(inputs["source_layers"])
    psc_src = layers()
    vgg_src = layers()
    inputs.update({
        "psc_source_layers": psc_src,
        "psc_target_layers": offset(psc_src),
        "vgg_source_layers": vgg_src,
        "vgg_target_layers": offset(vgg_src),
    })
    return {k: inputs[k] for k in INPUT_KEYS[loss_id]}


# -- finite-difference oracle --------------------------------------------------

@dataclass
class FdInputReport:
    name: str
    n_coords: int
    max_rel: float
    mean_rel: float


@dataclass
class FdReport:
    loss_id: str
    value: float
    h: float
    seed: int
    max_rel: float
    clamp_boundary: bool
    inputs: list

    def as_dict(self) -> dict:
        return {
            "loss_id": self.loss_id,
            "value": self.value,
            "h": self.h,
            "seed": self.seed,
            "max_rel": self.max_rel,
            "clamp_boundary": self.clamp_boundary,
            "inputs": [
                {
                    "name": r.name,
                    "n_coords": r.n_coords,
                    "max_rel": r.max_rel,
                    "mean_rel": r.mean_rel,
                }
                for r in self.inputs
            ],
        }


def _working_copy(loss_id, inputs):
    """Mutable float64 copy of the inputs, plus (key, array) probe pairs."""
    work = {}
    probes = []
    for key in INPUT_KEYS[loss_id]:
        if key not in inputs:
            continue
        if key in _LIST_KEYS:
            arrs = [np.array(a, dtype=np.float64) for a in inputs[key]]
            work[key] = arrs
            probes.extend((f"{key}.{i}", a) for i, a in enumerate(arrs))
        else:
            a = np.array(inputs[key], dtype=np.float64)
            work[key] = a
            probes.append((key, a))
    return work, probes


# A central difference of a value |L| at step h cannot resolve anything
# below ~eps |L| / 2h (the two evaluations cancel to that many digits);
# the allowance scales that resolution up to the 1e-5 certification level.
_FD_NOISE_ALLOWANCE = 1e5


def fd_check(loss_id: str, inputs: dict, config: GradConfig | None = None,
             h: float = 1e-6, min_coords: int = 200, seed: int = 0) -> FdReport:
    """Central finite differences against grad_eval on a seeded coordinate
    subset (every coordinate when an input is smaller than ``min_coords``).

    The per-coordinate relative error is |fd - an| / max(|fd|, |an|, floor)
    where the floor covers both the gradient scale of the tensor and the
    cancellation resolution of the difference quotient itself; coordinates
    smaller than what f64 can resolve at the given h are measured against
    that resolution rather than their own magnitude.
    """
    if not np.isfinite(h) or h <= 0:
        raise ConfigError(f"step h must be > 0, got {h!r}")
    if loss_id not in _DISPATCH:
        raise ConfigError(f"unknown loss id {loss_id!r}; valid: {LOSS_IDS}")
    cfg = config if config is not None else GradConfig()
    res = grad_eval(loss_id, inputs, cfg)
    work, probes = _working_copy(loss_id, inputs)
    rng = np.random.default_rng(seed)
    fd_noise = np.finfo(np.float64).eps * (1.0 + abs(res.value)) / (2.0 * h)

    reports = []
    overall = 0.0
    for name, arr in probes:
        g_an = res.grads[name].reshape(-1)
        flat = arr.reshape(-1)
        size = flat.size
        if size <= min_coords:
            coords = np.arange(size)
        else:
            coords = np.sort(rng.choice(size, size=min_coords, replace=False))
        floor = max(
            1e-12,
            1e-6 * (1.0 + float(np.max(np.abs(g_an)))),
            _FD_NOISE_ALLOWANCE * fd_noise,
        )
        rels = np.empty(coords.size)
        for idx, c in enumerate(coords):
            old = flat[c]
            flat[c] = old + h
            f_plus = loss_value(loss_id, work, cfg)
            flat[c] = old - h
            f_minus = loss_value(loss_id, work, cfg)
            flat[c] = old
            fd = (f_plus - f_minus) / (2.0 * h)
            an = g_an[c]
            rels[idx] = abs(fd - an) / max(abs(fd), abs(an), floor)
        max_rel = float(rels.max()) if rels.size else 0.0
        mean_rel = float(rels.mean()) if rels.size else 0.0
        overall = max(overall, max_rel)
        reports.append(FdInputReport(name=name, n_coords=int(coords.size),
                                     max_rel=max_rel, mean_rel=mean_rel))
    return FdReport(
        loss_id=loss_id, value=res.value, h=h, seed=seed,
        max_rel=overall, clamp_boundary=res.clamp_boundary, inputs=reports,
    )
