"""Geodesic curves and surfaces on the Pre-Shape hypersphere, plus the
weighted feature augmentation built on them.

A curve point at radian s from pre-shape a toward pre-shape b is

    cos(s) a + sin(s) (b - a cos d) / sin d,      d = arccos(<a, b>)

re-centered and renormalized to absorb floating drift (after ~50 chained
steps the raw combination can wander off the sphere by more than 1e-9).
A surface point walks the curve through a sequence of pre-shapes, using
the running weight ratio w_j / sum(w_1..w_j) as the radian directly; the
ratio is NOT a fraction of the pairwise distance, so the construction is
order sensitive by design and callers must keep patch-index order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateGeodesicError, ShapeError
from .preshape import COINCIDENT_DOT, PreShape, project


@dataclass(frozen=True)
class WeightSet:
    """Non-negative weights over n input pre-shapes, not all zero."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ConfigError(f"weights must be a non-empty vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ConfigError("weights must be finite and >= 0")
        if float(w.sum()) <= 0.0:
            raise ConfigError("weights must not all be zero")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class AugmentConfig:
    """How many augmented features to draw and how to pick their weights.

    scheme "emphasis" (deterministic): set i puts (1-gamma)/n everywhere
    plus gamma on patch i (cycling when m > n), so each augmentation leans
    on one patch while mixing all others.  scheme "dirichlet": seeded
    uniform-simplex draws.
    """

    m: int | None = None  # None means m = n (one augmentation per patch)
    gamma: float = 0.5
    scheme: str = "emphasis"
    seed: int = 0

    def __post_init__(self):
        if self.m is not None and self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.scheme not in ("emphasis", "dirichlet"):
            raise ConfigError(f"unknown weight scheme {self.scheme!r}")


def _curve_arrays(a: np.ndarray, b: np.ndarray, s: float):
    """Raw curve step on landmark arrays.

    Returns (out, cache) where cache carries everything the reverse-mode
    pass needs; cache is None when the step short-circuited to ``a``
    (s == 0 or coincident endpoints).
    """
    u = float(np.sum(a * b))
    # coincident endpoints carry no direction: short-circuit to the start
    if s == 0.0 or u >= COINCIDENT_DOT:
        return a, None
    if u <= -COINCIDENT_DOT:
        raise DegenerateGeodesicError("antipodal pre-shapes: no unique great circle")
    u = min(1.0, max(-1.0, u))
    d = float(np.arccos(u))
    sd = float(np.sqrt(1.0 - u * u))
    w = (b - u * a) / sd
    p = np.cos(s) * a + np.sin(s) * w
    # project back onto the constraint set: rounding in the w cancellation
    # can push row means past 1e-12 when s >> d
    pc = p - p.mean(axis=1, keepdims=True)
    n2 = float(np.linalg.norm(pc))
    out = pc / n2
    cache = {"a": a, "b": b, "s": s, "u": u, "sd": sd, "w": w, "out": out, "n2": n2}
    return out, cache


def curve_point(a: PreShape, b: PreShape, s: float, *, beyond: str = "warn") -> PreShape:
    """Point at radian s along the geodesic from a toward b.

    s must lie in [0, pi]; values past d(a, b) are accepted (the surface
    construction requests them) and emit a UserWarning unless
    beyond="allow".  Coincident endpoints return ``a`` unchanged;
    antipodal endpoints raise DegenerateGeodesicError.
    """
    if a.k != b.k:
        raise ShapeError(f"landmark counts differ: {a.k} != {b.k}")
    s = float(s)
    if not np.isfinite(s) or s < 0.0 or s > np.pi:
        raise ConfigError(f"radian s must lie in [0, pi], got {s!r}")
    if beyond not in ("warn", "allow"):
        raise ConfigError(f"beyond must be 'warn' or 'allow', got {beyond!r}")
    u = float(np.sum(a.landmarks * b.landmarks))
    d = float(np.arccos(min(1.0, max(-1.0, u))))
    if beyond == "warn" and s > d and u < COINCIDENT_DOT:
        warnings.warn(f"radian s={s:.6g} exceeds d(a,b)={d:.6g}", UserWarning, stacklevel=2)
    out, cache = _curve_arrays(a.landmarks, b.landmarks, s)
    if cache is None:
        return a
    return PreShape(out)


def _surface_arrays(taus: Sequence[np.ndarray], weights: np.ndarray):
    """Iterative surface construction on raw arrays; returns (out, steps).

    steps is the per-j list of (tau_index, cache) consumed by the
    reverse-mode pass; cache None marks a short-circuited step.
    """
    mu = taus[0]
    steps = []
    running = float(weights[0])
    for j in range(1, len(taus)):
        wj = float(weights[j])
        running += wj
        if wj == 0.0:
            steps.append((j, None))
            continue
        s = wj / running
        try:
            mu, cache = _curve_arrays(mu, taus[j], s)
        except DegenerateGeodesicError as e:
            raise DegenerateGeodesicError(
                f"antipodal pair at surface step j={j + 1}", index=j + 1
            ) from e
        steps.append((j, cache))
    return mu, steps


def surface_point(taus: Sequence[PreShape], w: WeightSet) -> PreShape:
    """Weighted geodesic surface point: chain curve steps through taus.

    mu_1 = tau_1, then mu_j walks from mu_{j-1} toward tau_j by radian
    w_j / sum(w_1..w_j).  Zero-weight entries are skipped, which also
    makes the result invariant to appending zero-weight inputs.
    """
    if len(taus) < 2:
        raise ShapeError(f"need n >= 2 pre-shapes, got {len(taus)}")
    if len(w) != len(taus):
        raise ShapeError(f"{len(w)} weights for {len(taus)} pre-shapes")
    k = taus[0].k
    for i, t in enumerate(taus):
        if t.k != k:
            raise ShapeError(f"landmark count mismatch at index {i}: {t.k} != {k}")
    out, steps = _surface_arrays([t.landmarks for t in taus], w.weights)
    if all(cache is None for _, cache in steps):
        return taus[0]
    return PreShape(out)


def generate_weight_sets(n: int, cfg: AugmentConfig) -> list[WeightSet]:
    """Produce the m weight sets that parameterize the augmentation."""
    if n < 2:
        raise ConfigError(f"need n >= 2 patches, got {n}")
    m = cfg.m if cfg.m is not None else n
    if cfg.scheme == "emphasis":
        base = (1.0 - cfg.gamma) / n
        sets = []
        for i in range(m):
            w = np.full(n, base)
            w[i % n] += cfg.gamma
            sets.append(WeightSet(w))
        return sets
    rng = np.random.default_rng(cfg.seed)
    draws = rng.dirichlet(np.ones(n), size=m)
    return [WeightSet(draws[i]) for i in range(m)]


def augment(taus: Sequence[PreShape], cfg: AugmentConfig) -> list[PreShape]:
    """FAGS: m surface points under the generated weight sets.

    Callers comparing two feature stacks (style losses) must reuse one
    weight-set list for both sides; the loss modules enforce this.
    """
    sets = generate_weight_sets(len(taus), cfg)
    return [surface_point(taus, w) for w in sets]


def augment_tensors(features: Sequence, cfg: AugmentConfig) -> list[PreShape]:
    """Convenience: project raw feature tensors, then augment."""
    return augment([project(f) for f in features], cfg)
