"""Diffusion schedule math, DDIM inversion with respacing, and the
loss-gradient guided reverse loop with a pluggable noise predictor.

The update from timestep t to the previous respaced step is

    x_prev = sqrt(abar_prev) * xhat + sqrt(1 - abar_prev - sigma^2) * eps_hat
             + sigma * noise

with xhat the denoised estimate; guidance shifts xhat by the (signed)
gradient of the total loss before the update.  The denoised estimate's
denominator is sqrt(abar_t) by default ("standard": it inverts the forward
blend exactly); "eq3-literal" switches to sqrt(alpha_t) for callers that
want the per-step coefficient instead.

Noise predictors are callables (x_t, t) -> eps_hat, deterministic for a
fixed (x_t, t).  ``toy_predictor`` builds the exact predictor for a
Gaussian data distribution N(mean, scale^2 I):

    eps_hat = (x_t - sqrt(abar_t) mean) * sqrt(1 - abar_t)
              / (1 - abar_t (1 - scale^2))

The denominator is the marginal variance abar*scale^2 + (1 - abar); the
scale=0 limit (point mass) reduces to (x_t - sqrt(abar) mean)/sqrt(1-abar).
The test suite verifies this closed form against a Monte-Carlo posterior
oracle before anything else relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .contentloss import LossWeights
from .errors import ConfigError, ScheduleError, ShapeError
from .geodesic import AugmentConfig
from .grad import GradConfig, grad_eval
from .swc import PatchPlan, extract
from .tensor import validate_tensor

SIGMA_MODES = ("ddim", "ddpm")
EQ3_VARIANTS = ("standard", "eq3-literal")


@dataclass(frozen=True)
class Schedule:
    """Time discretization: arrays are indexed by absolute timestep 0..T,
    with index 0 the clean limit (alpha_bar = 1)."""

    T: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    respaced: tuple
    t0: int
    sigma_mode: str

    @property
    def T_prime(self) -> int:
        return len(self.respaced)

    def prev_step(self, idx: int) -> int:
        """Absolute timestep preceding respaced position idx (1-based); 0 at the bottom."""
        return self.respaced[idx - 2] if idx >= 2 else 0

    def sigma(self, idx: int) -> float:
        """Noise level for the step at respaced position idx (1-based)."""
        if not 1 <= idx <= self.T_prime:
            raise IndexError(f"respaced position {idx} outside 1..{self.T_prime}")
        if self.sigma_mode == "ddim":
            return 0.0
        ab_t = self.alpha_bars[self.respaced[idx - 1]]
        ab_prev = self.alpha_bars[self.prev_step(idx)]
        return float(np.sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * np.sqrt(1.0 - ab_t / ab_prev))


def build_schedule(T: int = 1000, T_prime: int = 50, t0: int = 25,
                   sigma_mode: str = "ddim",
                   beta_start: float = 1e-4, beta_end: float = 0.02) -> Schedule:
    """Linear beta schedule over T steps, respaced to T' evenly spaced
    timesteps (final step included); t0 counts guided steps from the top of
    the truncated range."""
    if T < 1 or T_prime < 1 or T < T_prime:
        raise ConfigError(f"need T >= T' >= 1, got T={T}, T'={T_prime}")
    if not 1 <= t0 <= T_prime:
        raise ConfigError(f"t0 must lie in 1..{T_prime}, got {t0}")
    if sigma_mode not in SIGMA_MODES:
        raise ConfigError(f"sigma_mode must be one of {SIGMA_MODES}, got {sigma_mode!r}")
    if not (0.0 < beta_start < 1.0 and 0.0 < beta_end < 1.0):
        raise ConfigError(f"betas must lie in (0, 1), got {beta_start}, {beta_end}")

    betas = np.zeros(T + 1)
    betas[1:] = np.linspace(beta_start, beta_end, T)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    alpha_bars[0] = 1.0
    if np.any(np.diff(alpha_bars) >= 0):
        raise ScheduleError("alpha_bar must be strictly decreasing")
    respaced = tuple((T * (j + 1)) // T_prime for j in range(T_prime))
    betas.flags.writeable = False
    alphas.flags.writeable = False
    alpha_bars.flags.writeable = False
    return Schedule(T=T, betas=betas, alphas=alphas, alpha_bars=alpha_bars,
                    respaced=respaced, t0=t0, sigma_mode=sigma_mode)


def _check_t(sched: Schedule, t: int, lo: int = 0) -> int:
    t = int(t)
    if not lo <= t <= sched.T:
        raise IndexError(f"timestep {t} outside {lo}..{sched.T}")
    return t


def q_sample(x0, t: int, eps, sched: Schedule) -> np.ndarray:
    """Forward noising: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps."""
    x = validate_tensor(x0, "x0").astype(np.float64, copy=False)
    e = validate_tensor(eps, "eps").astype(np.float64, copy=False)
    if x.shape != e.shape:
        raise ShapeError(f"shapes differ: {x.shape} != {e.shape}")
    t = _check_t(sched, t)
    ab = sched.alpha_bars[t]
    return np.sqrt(ab) * x + np.sqrt(1.0 - ab) * e


def _predict(predictor, x, t):
    eps = np.asarray(predictor(x, t), dtype=np.float64)
    if eps.shape != x.shape:
        raise ShapeError(f"predictor returned shape {eps.shape} for input {x.shape}")
    if not np.all(np.isfinite(eps)):
        raise ScheduleError(f"predictor returned non-finite values at t={t}")
    return eps


def denoised_estimate(x_t, t: int, predictor, sched: Schedule,
                      eq3: str = "standard") -> np.ndarray:
    """One-shot clean-image prediction from the noisy x_t."""
    if eq3 not in EQ3_VARIANTS:
        raise ConfigError(f"eq3 must be one of {EQ3_VARIANTS}, got {eq3!r}")
    x = validate_tensor(x_t, "x_t").astype(np.float64, copy=False)
    t = _check_t(sched, t, lo=1)
    eps = _predict(predictor, x, t)
    ab = sched.alpha_bars[t]
    denom_sq = ab if eq3 == "standard" else sched.alphas[t]
    if denom_sq <= 0.0:
        raise ScheduleError(f"non-positive denominator at t={t}")
    return (x - np.sqrt(1.0 - ab) * eps) / np.sqrt(denom_sq)


def _denoise_arrays(x, eps, ab, alpha, eq3):
    denom_sq = ab if eq3 == "standard" else alpha
    if denom_sq <= 0.0:
        raise ScheduleError("non-positive denominator in denoised estimate")
    return (x - np.sqrt(1.0 - ab) * eps) / np.sqrt(denom_sq)


def ddim_invert(x0, predictor, sched: Schedule, t_stop: int,
                eq3: str = "standard") -> np.ndarray:
    """Deterministic encoding of a clean image up to respaced position t_stop.

    Each hop from timestep s to the next respaced timestep t evaluates the
    predictor at (x_s, t); at the clean start (s = 0, alpha_bar = 1) the
    denoised estimate is x_0 itself regardless of the prediction.
    """
    if eq3 not in EQ3_VARIANTS:
        raise ConfigError(f"eq3 must be one of {EQ3_VARIANTS}, got {eq3!r}")
    if not 0 <= t_stop <= sched.T_prime:
        raise ConfigError(f"t_stop must lie in 0..{sched.T_prime}, got {t_stop}")
    x = validate_tensor(x0, "x0").astype(np.float64, copy=True)
    for j in range(1, t_stop + 1):
        t_next = sched.respaced[j - 1]
        t_cur = sched.prev_step(j)
        eps = _predict(predictor, x, t_next)
        xhat = _denoise_arrays(x, eps, sched.alpha_bars[t_cur], sched.alphas[t_cur], eq3)
        ab_next = sched.alpha_bars[t_next]
        x = np.sqrt(ab_next) * xhat + np.sqrt(1.0 - ab_next) * eps
    return x


def toy_predictor(mean, scale: float, sched: Schedule):
    """Exact noise predictor for x0 ~ N(mean, scale^2 I); see module docstring."""
    if scale < 0 or not np.isfinite(scale):
        raise ConfigError(f"scale must be >= 0, got {scale!r}")
    mean_arr = np.asarray(mean, dtype=np.float64)

    def predict(x_t, t):
        x = np.asarray(x_t, dtype=np.float64)
        ab = sched.alpha_bars[_check_t(sched, t)]
        b2 = 1.0 - ab
        centered = x - np.sqrt(ab) * mean_arr
        if b2 <= 0.0:
            return np.zeros_like(x)
        if scale == 0.0:
            return centered / np.sqrt(b2)
        return centered * np.sqrt(b2) / (b2 + ab * scale * scale)

    return predict


# -- guidance ------------------------------------------------------------------

_LOSS_WEIGHT_FIELDS = {
    "pc": "lambda_pc",
    "pd": "lambda_pd",
    "psc": "lambda_ps",
    "zecon": "lambda_z",
    "vgg": "lambda_v",
    "mse": "lambda_m",
}


def avg_pool(x: np.ndarray, factor: int) -> np.ndarray:
    """Non-overlapping box average over factor x factor blocks of a c x H x W map."""
    c, h, w = x.shape
    if h % factor or w % factor:
        raise ShapeError(f"{h} x {w} map not divisible by pool factor {factor}")
    return x.reshape(c, h // factor, factor, w // factor, factor).mean(axis=(2, 4))


def avg_pool_vjp(g: np.ndarray, factor: int) -> np.ndarray:
    return np.repeat(np.repeat(g, factor, axis=1), factor, axis=2) / (factor * factor)


@dataclass
class GuidanceConfig:
    """Loss assembly for the guided loop, with in-core toy extractors.

    Patch features are the raw pixels of each planned crop (they feed both
    the style losses and the contrastive term); layer features are box
    average-pools of the image at the configured factors (they feed both
    the self-correlation and feature-MSE terms).  Source-side features are
    extracted once at construction.
    """

    source_image: np.ndarray
    tgt_text_feat: np.ndarray
    src_text_feat: np.ndarray
    plan: PatchPlan
    weights: LossWeights = field(default_factory=LossWeights)
    aug: AugmentConfig = field(default_factory=AugmentConfig)
    eta: float = 1.0
    sign: str = "descent"
    losses: tuple = ("pc", "pd", "psc", "zecon", "vgg", "mse")
    pool_factors: tuple = (8, 16)
    temperature: float = 0.07

    def __post_init__(self):
        if self.eta <= 0 or not np.isfinite(self.eta):
            raise ConfigError(f"step scale eta must be > 0, got {self.eta!r}")
        if self.sign not in ("descent", "paper-plus"):
            raise ConfigError(f"sign must be 'descent' or 'paper-plus', got {self.sign!r}")
        unknown = set(self.losses) - set(_LOSS_WEIGHT_FIELDS)
        if unknown:
            raise ConfigError(f"unknown losses {sorted(unknown)}")
        self.source_image = validate_tensor(self.source_image, "source_image").astype(
            np.float64, copy=False
        )
        zeroed = {
            f: 0.0
            for name, f in _LOSS_WEIGHT_FIELDS.items()
            if name not in self.losses
        }
        self.effective_weights = replace(self.weights, **zeroed)
        c = self.source_image.shape[0]
        if (c * self.plan.side * self.plan.side) % 2 != 0:
            raise ConfigError(
                f"patch features have odd element count {c}*{self.plan.side}^2; "
                "pick an image size / patch count giving an even product"
            )
        self.source_patches = extract(self.source_image, self.plan)
        self.source_layers = [avg_pool(self.source_image, f) for f in self.pool_factors]
        if self.effective_weights.lambda_ps != 0.0:
            for f, layer in zip(self.pool_factors, self.source_layers):
                if layer.size % 2 != 0:
                    raise ConfigError(
                        f"pool factor {f} yields an odd layer element count "
                        f"{layer.size}; self-correlation projection needs an even one"
                    )

    @property
    def active(self) -> bool:
        w = self.effective_weights
        return any(
            getattr(w, f) != 0.0 for f in
            ("lambda_pc", "lambda_pd", "lambda_ps", "lambda_z", "lambda_v", "lambda_m")
        )

    def loss_and_grad(self, x_hat: np.ndarray):
        """Total loss at x_hat and its gradient with respect to the image."""
        tgt_patches = extract(x_hat, self.plan)
        tgt_layers = [avg_pool(x_hat, f) for f in self.pool_factors]
        inputs = {
            "target_patches": tgt_patches,
            "source_patches": self.source_patches,
            "tgt_text": self.tgt_text_feat,
            "src_text": self.src_text_feat,
            "psc_source_layers": self.source_layers,
            "psc_target_layers": tgt_layers,
            "vgg_source_layers": self.source_layers,
            "vgg_target_layers": tgt_layers,
            "source_image": self.source_image,
            "target_image": x_hat,
        }
        cfg = GradConfig(aug=self.aug, weights=self.effective_weights,
                         temperature=self.temperature)
        res = grad_eval("total", inputs, cfg)
        g = np.array(res.grads["target_image"])
        for i, p in enumerate(self.plan.patches):
            g[:, p.e : p.e + p.side, p.f : p.f + p.side] += res.grads[
                f"target_patches.{i}"
            ].reshape(tgt_patches[i].shape)
        for l, f in enumerate(self.pool_factors):
            g += avg_pool_vjp(res.grads[f"psc_target_layers.{l}"], f)
            g += avg_pool_vjp(res.grads[f"vgg_target_layers.{l}"], f)
        return res.value, g


def guided_step(x_t, idx: int, predictor, sched: Schedule,
                guidance: GuidanceConfig | None = None,
                rng: np.random.Generator | None = None,
                eq3: str = "standard"):
    """One reverse step from respaced position idx (1-based) down one notch.

    Returns (x_prev, loss_value); loss_value is None when guidance is off.
    """
    x = validate_tensor(x_t, "x_t").astype(np.float64, copy=False)
    if not 1 <= idx <= sched.T_prime:
        raise IndexError(f"respaced position {idx} outside 1..{sched.T_prime}")
    t = sched.respaced[idx - 1]
    eps = _predict(predictor, x, t)
    xhat = _denoise_arrays(x, eps, sched.alpha_bars[t], sched.alphas[t], eq3)

    loss = None
    if guidance is not None and guidance.active:
        loss, g = guidance.loss_and_grad(xhat)
        step = guidance.eta * g
        xhat = xhat - step if guidance.sign == "descent" else xhat + step

    ab_prev = sched.alpha_bars[sched.prev_step(idx)]
    sigma = sched.sigma(idx)
    dir_coef = np.sqrt(max(1.0 - ab_prev - sigma * sigma, 0.0))
    x_prev = np.sqrt(ab_prev) * xhat + dir_coef * eps
    if sigma > 0.0:
        if rng is None:
            raise ConfigError("sigma > 0 requires a seeded random generator")
        x_prev = x_prev + sigma * rng.standard_normal(x.shape)
    return x_prev, loss


def sample_loop(x0, predictor, sched: Schedule,
                guidance: GuidanceConfig | None = None,
                rng: np.random.Generator | None = None,
                eq3: str = "standard"):
    """Invert the clean image up to t0, then run guided steps back to clean.

    Returns (stylized image, per-step total-loss trace of length t0).
    """
    x = ddim_invert(x0, predictor, sched, sched.t0, eq3)
    trace = []
    for idx in range(sched.t0, 0, -1):
        x, loss = guided_step(x, idx, predictor, sched, guidance, rng, eq3)
        trace.append(0.0 if loss is None else float(loss))
    return x, trace
