"""Command-line entry point.

Subcommands cover every library operation; tensors travel as TNSR files,
structured output is JSON with floats at 17 significant digits, and every
run with the same argv + seed + input files produces identical bytes.
Exit codes: 0 success, 1 domain error (JSON payload on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import _jsonout, diffusion, grad, metrics, swc
from .contentloss import (
    LossWeights,
    loss_content,
    loss_feature_mse,
    loss_mse,
    loss_patch_contrastive,
    loss_psc,
)
from .errors import ConfigError, FagstyleError
from .geodesic import AugmentConfig, WeightSet, augment, curve_point, surface_point
from .preshape import PreShape, geodesic_distance, project
from .styleloss import StyleInputs, loss_pc, loss_pd, loss_style
from .tensor import read_tensor, write_tensor

# Canonical subcommand for every library operation (coverage-tested).
OPERATION_COMMANDS = {
    "write_tensor": "project",
    "read_tensor": "project",
    "reshape_to_landmarks": "project",
    "project": "project",
    "geodesic_distance": "gdist",
    "curve_point": "curve",
    "surface_point": "surface",
    "generate_weight_sets": "augment",
    "augment": "augment",
    "plan": "swc-plan",
    "extract": "swc-extract",
    "loss_pc": "loss pc",
    "loss_pd": "loss pd",
    "loss_style": "loss style",
    "self_correlation": "loss psc",
    "loss_psc": "loss psc",
    "loss_mse": "loss mse",
    "loss_feature_mse": "loss vgg",
    "loss_patch_contrastive": "loss zecon",
    "loss_content": "loss content",
    "grad_eval": "gradcheck",
    "fd_check": "gradcheck",
    "build_schedule": "schedule",
    "q_sample": "guide",
    "denoised_estimate": "guide",
    "ddim_invert": "guide",
    "guided_step": "guide",
    "sample_loop": "guide",
    "toy_predictor": "guide",
    "psnr": "metrics psnr",
    "ssim": "metrics ssim",
    "clip_score": "metrics clip-i",
}

_thread_cap = 1


def get_thread_cap() -> int:
    return _thread_cap


def _print_json(obj):
    sys.stdout.write(_jsonout.dumps(obj, indent=2) + "\n")


def _print_scalar(x: float):
    sys.stdout.write(_jsonout.fmt_float(x) + "\n")


def _load_preshape(path) -> PreShape:
    return project(read_tensor(path))


def _weights_from_dict(d: dict | None) -> LossWeights:
    if not d:
        return LossWeights()
    allowed = {"lambda_pc", "lambda_pd", "lambda_ps", "lambda_z", "lambda_v", "lambda_m", "n"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown weight keys {sorted(unknown)}")
    return LossWeights(**d)


def _aug_from_dict(d: dict | None) -> AugmentConfig:
    if not d:
        return AugmentConfig()
    allowed = {"m", "gamma", "scheme", "seed"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown augment keys {sorted(unknown)}")
    return AugmentConfig(**d)


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e


# -- simple geometry commands ---------------------------------------------------


def _cmd_project(args) -> int:
    t = read_tensor(args.input)
    tau = project(t)
    n_bytes = write_tensor(tau.landmarks, args.output)
    _print_json({"k": tau.k, "output": str(args.output), "bytes": n_bytes})
    return 0


def _cmd_gdist(args) -> int:
    a = _load_preshape(args.a)
    b = _load_preshape(args.b)
    _print_scalar(geodesic_distance(a, b))
    return 0


def _cmd_curve(args) -> int:
    a = _load_preshape(args.a)
    b = _load_preshape(args.b)
    point = curve_point(a, b, args.s, beyond="allow")
    n_bytes = write_tensor(point.landmarks, args.output)
    _print_json({
        "s": args.s,
        "distance": geodesic_distance(a, b),
        "output": str(args.output),
        "bytes": n_bytes,
    })
    return 0


def _cmd_surface(args) -> int:
    taus = [_load_preshape(p) for p in args.inputs]
    w = WeightSet(np.asarray(args.weights, dtype=np.float64))
    point = surface_point(taus, w)
    n_bytes = write_tensor(point.landmarks, args.output)
    _print_json({"n": len(taus), "output": str(args.output), "bytes": n_bytes})
    return 0


def _cmd_augment(args) -> int:
    taus = [_load_preshape(p) for p in args.inputs]
    cfg = AugmentConfig(m=args.m, gamma=args.gamma, scheme=args.scheme, seed=args.seed)
    outs = augment(taus, cfg)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, tau in enumerate(outs):
        path = outdir / f"augmented_{i:03d}.tnsr"
        write_tensor(tau.landmarks, path)
        files.append(str(path))
    _print_json({"m": len(outs), "files": files})
    return 0


# -- sliding window crop ----------------------------------------------------------


def _cmd_swc_plan(args) -> int:
    p = swc.plan(args.height, args.width, args.n, args.mode)
    _print_json(p.as_dict())
    return 0


def _cmd_swc_extract(args) -> int:
    img = read_tensor(args.image)
    p = swc.PatchPlan.from_dict(_load_json(args.plan))
    patches = swc.extract(img, p)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, patch in enumerate(patches):
        path = outdir / f"patch_{i:03d}.tnsr"
        write_tensor(patch, path)
        files.append(str(path))
    _print_json({"n": len(files), "side": p.side, "files": files})
    return 0


# -- losses ------------------------------------------------------------------------


def _read_list(cfg: dict, key: str):
    paths = cfg.get(key)
    if not isinstance(paths, list) or not paths:
        raise ConfigError(f"loss config needs a non-empty list at {key!r}")
    return [read_tensor(p) for p in paths]


def _read_one(cfg: dict, key: str):
    path = cfg.get(key)
    if not isinstance(path, str):
        raise ConfigError(f"loss config needs a file path at {key!r}")
    return read_tensor(path)


def _style_inputs(cfg: dict) -> StyleInputs:
    return StyleInputs(
        target_patch_feats=tuple(_read_list(cfg, "target_patches")),
        source_patch_feats=tuple(_read_list(cfg, "source_patches")),
        tgt_text_feat=_read_one(cfg, "tgt_text"),
        src_text_feat=_read_one(cfg, "src_text"),
        aug_cfg=_aug_from_dict(cfg.get("augment")),
    )


def _loss_grad_inputs(kind: str, cfg: dict):
    """(grad loss_id, grad inputs dict) for the CLI loss subcommand."""
    if kind in ("pc", "pd", "style"):
        inputs = {
            "target_patches": _read_list(cfg, "target_patches"),
            "tgt_text": _read_one(cfg, "tgt_text"),
        }
        if kind != "pc":
            inputs["source_patches"] = _read_list(cfg, "source_patches")
            inputs["src_text"] = _read_one(cfg, "src_text")
        return kind, inputs
    if kind == "psc":
        return "psc", {
            "source_layers": _read_list(cfg, "source_layers"),
            "target_layers": _read_list(cfg, "target_layers"),
        }
    if kind == "vgg":
        return "feature_mse", {
            "source_layers": _read_list(cfg, "source_layers"),
            "target_layers": _read_list(cfg, "target_layers"),
        }
    if kind == "zecon":
        return "patch_contrastive", {
            "source_patches": _read_list(cfg, "source_patches"),
            "target_patches": _read_list(cfg, "target_patches"),
        }
    if kind == "mse":
        return "mse", {
            "source_image": _read_one(cfg, "source_image"),
            "target_image": _read_one(cfg, "target_image"),
        }
    if kind == "content":
        weights = _weights_from_dict(cfg.get("weights"))
        inputs = {}
        if weights.lambda_ps != 0.0:
            inputs["psc_source_layers"] = _read_list(cfg, "psc_source_layers")
            inputs["psc_target_layers"] = _read_list(cfg, "psc_target_layers")
        if weights.lambda_z != 0.0:
            inputs["source_patches"] = _read_list(cfg, "source_patches")
            inputs["target_patches"] = _read_list(cfg, "target_patches")
        if weights.lambda_v != 0.0:
            inputs["vgg_source_layers"] = _read_list(cfg, "vgg_source_layers")
            inputs["vgg_target_layers"] = _read_list(cfg, "vgg_target_layers")
        if weights.lambda_m != 0.0:
            inputs["source_image"] = _read_one(cfg, "source_image")
            inputs["target_image"] = _read_one(cfg, "target_image")
        return "content", inputs
    raise ConfigError(f"unknown loss kind {kind!r}")


def _cmd_loss(args) -> int:
    cfg = _load_json(args.config)
    kind = args.kind
    weights = _weights_from_dict(cfg.get("weights"))
    aug = _aug_from_dict(cfg.get("augment"))
    temperature = float(cfg.get("temperature", 0.07))

    if kind == "pc":
        value = loss_pc(_style_inputs(cfg))
    elif kind == "pd":
        value = loss_pd(_style_inputs(cfg))
    elif kind == "style":
        value = loss_style(_style_inputs(cfg), weights)
    elif kind == "psc":
        value = loss_psc(_read_list(cfg, "source_layers"), _read_list(cfg, "target_layers"))
    elif kind == "vgg":
        value = loss_feature_mse(_read_list(cfg, "source_layers"), _read_list(cfg, "target_layers"))
    elif kind == "zecon":
        value = loss_patch_contrastive(
            _read_list(cfg, "source_patches"), _read_list(cfg, "target_patches"), temperature
        )
    elif kind == "mse":
        value = loss_mse(_read_one(cfg, "source_image"), _read_one(cfg, "target_image"))
    elif kind == "content":
        kwargs = {}
        if weights.lambda_ps != 0.0:
            kwargs["psc_src"] = _read_list(cfg, "psc_source_layers")
            kwargs["psc_tgt"] = _read_list(cfg, "psc_target_layers")
        if weights.lambda_z != 0.0:
            kwargs["zecon_src"] = _read_list(cfg, "source_patches")
            kwargs["zecon_tgt"] = _read_list(cfg, "target_patches")
        if weights.lambda_v != 0.0:
            kwargs["vgg_src"] = _read_list(cfg, "vgg_source_layers")
            kwargs["vgg_tgt"] = _read_list(cfg, "vgg_target_layers")
        if weights.lambda_m != 0.0:
            kwargs["image_src"] = _read_one(cfg, "source_image")
            kwargs["image_tgt"] = _read_one(cfg, "target_image")
        value = loss_content(weights=weights, temperature=temperature, **kwargs)
    else:
        raise ConfigError(f"unknown loss kind {kind!r}")

    if args.grad_out:
        loss_id, inputs = _loss_grad_inputs(kind, cfg)
        gcfg = grad.GradConfig(aug=aug, weights=weights, temperature=temperature)
        res = grad.grad_eval(loss_id, inputs, gcfg)
        outdir = Path(args.grad_out)
        outdir.mkdir(parents=True, exist_ok=True)
        files = {}
        for name in sorted(res.grads):
            path = outdir / (name.replace(".", "_") + ".grad.tnsr")
            write_tensor(res.grads[name], path)
            files[name] = str(path)
        _print_json({
            "value": res.value,
            "clamp_boundary": res.clamp_boundary,
            "grads": files,
        })
    else:
        _print_scalar(value)
    return 0


def _cmd_gradcheck(args) -> int:
    inputs = grad.seeded_inputs(args.loss, args.seed)
    report = grad.fd_check(
        args.loss, inputs, h=args.h, min_coords=args.coords, seed=args.seed
    )
    _print_json(report.as_dict())
    return 0


# -- diffusion ----------------------------------------------------------------------


def _schedule_from_dict(d: dict | None) -> diffusion.Schedule:
    d = d or {}
    allowed = {"T", "T_prime", "t0", "sigma_mode", "beta_start", "beta_end"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown schedule keys {sorted(unknown)}")
    return diffusion.build_schedule(
        T=int(d.get("T", 1000)),
        T_prime=int(d.get("T_prime", 50)),
        t0=int(d.get("t0", 25)),
        sigma_mode=str(d.get("sigma_mode", "ddpm")),
        beta_start=float(d.get("beta_start", 1e-4)),
        beta_end=float(d.get("beta_end", 0.02)),
    )


def _cmd_schedule(args) -> int:
    sched = diffusion.build_schedule(
        T=args.T, T_prime=args.t_prime, t0=args.t0,
        sigma_mode=args.sigma_mode,
        beta_start=args.beta_start, beta_end=args.beta_end,
    )
    steps = []
    for idx, t in enumerate(sched.respaced, start=1):
        steps.append({
            "index": idx,
            "t": t,
            "beta": float(sched.betas[t]),
            "alpha_bar": float(sched.alpha_bars[t]),
            "sigma": sched.sigma(idx),
        })
    _print_json({
        "T": sched.T, "T_prime": sched.T_prime, "t0": sched.t0,
        "sigma_mode": sched.sigma_mode, "steps": steps,
    })
    return 0


def _predictor_from_dict(d: dict | None, sched, shape) -> "callable":
    d = d or {}
    mean_spec = d.get("mean", 0.0)
    if isinstance(mean_spec, str):
        mean = read_tensor(mean_spec).astype(np.float64)
        if mean.shape != shape:
            raise ConfigError(f"predictor mean shape {mean.shape} != image shape {shape}")
    else:
        mean = np.full(shape, float(mean_spec))
    return diffusion.toy_predictor(mean, float(d.get("scale", 1.0)), sched)


def _guidance_from_config(cfg: dict, sched, source_image) -> diffusion.GuidanceConfig | None:
    g = cfg.get("guidance") or {}
    weights = _weights_from_dict(cfg.get("weights"))
    c, h, w = source_image.shape
    plan = swc.plan(h, w, weights.n, cfg.get("swc_mode", "full-coverage"))
    return diffusion.GuidanceConfig(
        source_image=source_image,
        tgt_text_feat=read_tensor(cfg["tgt_text"]),
        src_text_feat=read_tensor(cfg["src_text"]),
        plan=plan,
        weights=weights,
        aug=_aug_from_dict(cfg.get("augment")),
        eta=float(g.get("eta", 1.0)),
        sign=str(g.get("sign", "descent")),
        losses=tuple(g.get("losses", ("pc", "pd", "psc", "zecon", "vgg", "mse"))),
        pool_factors=tuple(g.get("pool_factors", (8, 16))),
        temperature=float(g.get("temperature", 0.07)),
    )


def _cmd_guide(args) -> int:
    cfg = _load_json(args.config)
    sched = _schedule_from_dict(cfg.get("schedule"))
    eq3 = str(cfg.get("eq3", "standard"))
    seed = int(cfg.get("seed", 0))
    x0 = read_tensor(cfg["source_image"]).astype(np.float64)
    if x0.ndim != 3:
        raise ConfigError(f"source image must be c x H x W, got shape {x0.shape}")
    predictor = _predictor_from_dict(cfg.get("predictor"), sched, x0.shape)
    outdir = Path(cfg.get("output_dir", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    stage = args.stage
    if stage == "qsample":
        t = args.t if args.t is not None else sched.respaced[sched.t0 - 1]
        eps = rng.standard_normal(x0.shape)
        x_t = diffusion.q_sample(x0, t, eps, sched)
        path = outdir / "qsample.tnsr"
        write_tensor(x_t, path)
        _print_json({"stage": stage, "t": t, "output": str(path)})
        return 0
    if stage == "denoise":
        t = args.t if args.t is not None else sched.respaced[sched.t0 - 1]
        eps = rng.standard_normal(x0.shape)
        x_t = diffusion.q_sample(x0, t, eps, sched)
        xhat = diffusion.denoised_estimate(x_t, t, predictor, sched, eq3)
        path = outdir / "denoised.tnsr"
        write_tensor(xhat, path)
        err = float(np.linalg.norm(xhat - x0) / max(np.linalg.norm(x0), 1e-300))
        _print_json({"stage": stage, "t": t, "output": str(path), "rel_err_vs_source": err})
        return 0
    if stage == "invert":
        x_t0 = diffusion.ddim_invert(x0, predictor, sched, sched.t0, eq3)
        path = outdir / "inverted.tnsr"
        write_tensor(x_t0, path)
        _print_json({
            "stage": stage, "t0": sched.t0,
            "t": sched.respaced[sched.t0 - 1] if sched.t0 >= 1 else 0,
            "output": str(path),
        })
        return 0

    guidance = _guidance_from_config(cfg, sched, x0)
    if stage == "step":
        x_t0 = diffusion.ddim_invert(x0, predictor, sched, sched.t0, eq3)
        x_prev, loss = diffusion.guided_step(x_t0, sched.t0, predictor, sched, guidance, rng, eq3)
        path = outdir / "step.tnsr"
        write_tensor(x_prev, path)
        _print_json({
            "stage": stage, "index": sched.t0,
            "loss": loss, "output": str(path),
        })
        return 0

    out, trace = diffusion.sample_loop(x0, predictor, sched, guidance, rng, eq3)
    out_path = outdir / "stylized.tnsr"
    write_tensor(out, out_path)
    trace_path = outdir / "trace.json"
    trace_doc = _jsonout.dumps({"trace": trace}, indent=2) + "\n"
    trace_path.write_text(trace_doc)
    _print_json({
        "stage": "full",
        "steps": len(trace),
        "loss_first": trace[0] if trace else None,
        "loss_last": trace[-1] if trace else None,
        "output": str(out_path),
        "trace": str(trace_path),
    })
    return 0


# -- metrics -------------------------------------------------------------------------


def _peak_value(spec: str) -> float:
    if spec == "unit":
        return 1.0
    if spec == "8bit":
        return 255.0
    try:
        return float(spec)
    except ValueError:
        raise ConfigError(f"peak must be 'unit', '8bit', or a number, got {spec!r}") from None


def _cmd_metrics(args) -> int:
    kind = args.kind
    if kind == "psnr":
        value = metrics.psnr(read_tensor(args.a), read_tensor(args.b), _peak_value(args.peak))
        report = metrics.MetricReport(psnr=value)
    elif kind == "ssim":
        value = metrics.ssim(read_tensor(args.a), read_tensor(args.b), _peak_value(args.peak))
        report = metrics.MetricReport(ssim=value)
    elif kind == "clip-i":
        value = metrics.clip_score(read_tensor(args.image_feat), read_tensor(args.text_feat))
        report = metrics.MetricReport(clip_i=value)
    else:
        feats = [read_tensor(p) for p in args.patch_feats]
        value = metrics.clip_score(feats, read_tensor(args.text_feat))
        report = metrics.MetricReport(clip_p=value, clip_p_patch_side=args.patch_side)
    _print_json(report.as_dict())
    return 0


# -- parser ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fagstyle",
        description="Pre-Shape geometry, geodesic feature augmentation, "
                    "patch losses, and guided diffusion over TNSR files.",
    )
    ap.add_argument("--threads", type=int, default=None,
                    help="cap on worker threads (or set FAG_THREADS)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project a tensor into the Pre-Shape Space")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("gdist", help="geodesic distance between two projected tensors")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=_cmd_gdist)

    p = sub.add_parser("curve", help="point on the geodesic curve at radian s")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_curve)

    p = sub.add_parser("surface", help="weighted geodesic surface point")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--weights", nargs="+", type=float, required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_surface)

    p = sub.add_parser("augment", help="m augmented pre-shapes from n inputs")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--scheme", choices=("emphasis", "dirichlet"), default="emphasis")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("swc-plan", help="sliding-window patch grid as JSON")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=swc.MODES, default="full-coverage")
    p.set_defaults(func=_cmd_swc_plan)

    p = sub.add_parser("swc-extract", help="crop the planned patches from an image")
    p.add_argument("--image", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=_cmd_swc_extract)

    p = sub.add_parser("loss", help="evaluate a loss over TNSR files")
    p.add_argument("kind", choices=("pc", "pd", "style", "psc", "mse", "vgg", "zecon", "content"))
    p.add_argument("--config", required=True, help="JSON naming input files and parameters")
    p.add_argument("--grad-out", default=None, help="also write gradient tensors here")
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("gradcheck", help="finite-difference report for a loss id")
    p.add_argument("--loss", required=True, choices=grad.LOSS_IDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-6)
    p.add_argument("--coords", type=int, default=200)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("schedule", help="emit beta / alpha_bar / sigma per respaced step")
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--t-prime", type=int, default=50)
    p.add_argument("--t0", type=int, default=25)
    p.add_argument("--sigma-mode", choices=diffusion.SIGMA_MODES, default="ddim")
    p.add_argument("--beta-start", type=float, default=1e-4)
    p.add_argument("--beta-end", type=float, default=0.02)
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("guide", help="guided reverse diffusion from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--stage", choices=("full", "invert", "qsample", "denoise", "step"),
                   default="full")
    p.add_argument("--t", type=int, default=None,
                   help="absolute timestep for qsample/denoise stages")
    p.set_defaults(func=_cmd_guide)

    p = sub.add_parser("metrics", help="image quality and embedding scores")
    msub = p.add_subparsers(dest="kind", required=True)
    mp = msub.add_parser("psnr")
    mp.add_argument("--a", required=True)
    mp.add_argument("--b", required=True)
    mp.add_argument("--peak", default="unit", help="'unit', '8bit', or a number")
    mp.set_defaults(func=_cmd_metrics)
    mp = msub.add_parser("ssim")
    mp.add_argument("--a", required=True)
    mp.add_argument("--b", required=True)
    mp.add_argument("--peak", default="unit")
    mp.set_defaults(func=_cmd_metrics)
    mp = msub.add_parser("clip-i")
    mp.add_argument("--image-feat", required=True)
    mp.add_argument("--text-feat", required=True)
    mp.set_defaults(func=_cmd_metrics)
    mp = msub.add_parser("clip-p")
    mp.add_argument("--patch-feats", nargs="+", required=True)
    mp.add_argument("--text-feat", required=True)
    mp.add_argument("--patch-side", type=int, default=64)
    mp.set_defaults(func=_cmd_metrics)

    return ap


def main(argv=None) -> int:
    global _thread_cap
    parser = _build_parser()
    args = parser.parse_args(argv)
    cap = args.threads
    if cap is None:
        env = os.environ.get("FAG_THREADS")
        cap = int(env) if env else 1
    if cap < 1:
        parser.error(f"--threads must be >= 1, got {cap}")
    _thread_cap = cap
    try:
        return args.func(args)
    except FagstyleError as e:
        sys.stderr.write(json.dumps(e.payload()) + "\n")
        return 1
    except (OSError, IndexError, KeyError) as e:
        sys.stderr.write(json.dumps({"error": "io", "message": str(e)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
