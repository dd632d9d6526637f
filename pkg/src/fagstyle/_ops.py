"""Reverse-mode primitives for the fixed op set used by the losses.

Each *_fwd returns (output, cache); the matching *_vjp consumes the cache
and the output cotangent.  No general autodiff: the op graph is small and
hand-written pullbacks keep the chain auditable.  Forward code paths are
shared with the plain loss functions, so a loss value computed with
recording enabled is bit-identical to the unrecorded one.
"""

from __future__ import annotations

import numpy as np

from .geodesic import _curve_arrays, _surface_arrays
from .preshape import COINCIDENT_DOT, _center_normalize, reshape_to_landmarks


# -- projection (reshape -> center -> normalize) ---------------------------

def project_fwd(x):
    a = np.asarray(x, dtype=np.float64)
    lm = reshape_to_landmarks(a)
    tau, nrm = _center_normalize(lm)
    return tau, (a.shape, tau, nrm)


def project_vjp(cache, gbar):
    shape, tau, nrm = cache
    g = (gbar - tau * float(np.sum(gbar * tau))) / nrm
    g = g - g.mean(axis=1, keepdims=True)
    return g.reshape(shape)


def project_keep_fwd(x):
    """Projection that hands back the input's own shape (for (u,v) indexing)."""
    a = np.asarray(x, dtype=np.float64)
    tau, nrm = _center_normalize(reshape_to_landmarks(a))
    return tau.reshape(a.shape), (a.shape, tau, nrm)


def project_keep_vjp(cache, gbar_shaped):
    shape, tau, nrm = cache
    return project_vjp(cache, np.asarray(gbar_shaped).reshape(tau.shape))


# -- geodesic curve / surface ----------------------------------------------

def curve_vjp(cache, gbar):
    """Pullback of one curve step (including the re-center + renormalize)."""
    a, b, s, u, sd = cache["a"], cache["b"], cache["s"], cache["u"], cache["sd"]
    out, n2 = cache["out"], cache["n2"]
    g = (gbar - out * float(np.sum(gbar * out))) / n2
    g = g - g.mean(axis=1, keepdims=True)
    abar = np.cos(s) * g
    wbar = np.sin(s) * g
    bbar = wbar / sd
    abar = abar - (u / sd) * wbar
    # dependence through u = <a, b>: w = (b - u a) / sqrt(1 - u^2)
    ubar = float(np.sum(wbar * (-a / sd + (b - u * a) * (u / sd**3))))
    abar = abar + ubar * b
    bbar = bbar + ubar * a
    return abar, bbar


def surface_fwd(taus, weights):
    return _surface_arrays(taus, weights)


def surface_vjp(steps, mubar, n_inputs):
    """Pullback through the chained curve steps; returns per-input cotangents."""
    taubars = [None] * n_inputs
    for j, cache in reversed(steps):
        if cache is None:
            continue
        abar, bbar = curve_vjp(cache, mubar)
        taubars[j] = bbar if taubars[j] is None else taubars[j] + bbar
        mubar = abar
    taubars[0] = mubar if taubars[0] is None else taubars[0] + mubar
    return taubars


# -- scalar heads ------------------------------------------------------------

def arc_distance_fwd(x, y):
    """Clamped arccos of the inner product.  Returns (d, cache, clamped).

    Inner products inside the coincidence band collapse to exactly 0 or pi
    with the zero sub-gradient (the same rule as geodesic_distance), since
    arccos cannot resolve them in f64.
    """
    u_raw = float(np.sum(x * y))
    clamped = abs(u_raw) >= COINCIDENT_DOT
    if u_raw >= COINCIDENT_DOT:
        d = 0.0
    elif u_raw <= -COINCIDENT_DOT:
        d = float(np.pi)
    else:
        d = float(np.arccos(u_raw))
    return d, (x, y, u_raw, clamped), clamped


def arc_distance_vjp(cache, dbar):
    x, y, u, clamped = cache
    if clamped:
        # zero sub-gradient at the clamp boundary
        return np.zeros_like(x), np.zeros_like(y)
    coef = -dbar / np.sqrt(1.0 - u * u)
    return coef * y, coef * x


def cosine_fwd(p, q):
    np_, nq = float(np.linalg.norm(p)), float(np.linalg.norm(q))
    c = float(np.dot(p, q) / (np_ * nq))
    return c, (p, q, np_, nq, c)


def cosine_vjp(cache, cbar):
    p, q, np_, nq, c = cache
    pbar = cbar * (q / (np_ * nq) - c * p / (np_ * np_))
    qbar = cbar * (p / (np_ * nq) - c * q / (nq * nq))
    return pbar, qbar


def smooth_l1(delta):
    """Standard smooth-l1 with transition at 1: 0.5 d^2 inside, |d|-0.5 outside."""
    ad = np.abs(delta)
    return np.where(ad < 1.0, 0.5 * delta * delta, ad - 0.5)


def smooth_l1_grad(delta):
    return np.clip(delta, -1.0, 1.0)


__all__ = [
    "project_fwd", "project_vjp", "project_keep_fwd", "project_keep_vjp",
    "curve_vjp", "surface_fwd", "surface_vjp",
    "arc_distance_fwd", "arc_distance_vjp", "cosine_fwd", "cosine_vjp",
    "smooth_l1", "smooth_l1_grad", "_curve_arrays",
]
