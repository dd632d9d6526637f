"""Sliding Window Crop: deterministic overlapping patch grids.

Two modes share the corner formula (e, f) = (floor(i/n_h)*s, (i mod n_w)*s):

* paper-literal: side = floor(H/(n_w+1)), stride = floor(side/2).  As
  written this grid spans roughly half the image; it is kept for exact
  reproduction of the published coordinates.
* full-coverage (default): side = floor(2H/(n_w+1)), stride = floor(side/2),
  and the last row/column of patches is snapped so it ends exactly at the
  image edge.  When H divides evenly by n_w+1 the snap is a no-op and every
  adjacent pair overlaps by exactly side/2; otherwise flooring makes the
  grid fall short (or long) by a few pixels and the snap restores coverage
  of every pixel at the cost of a slightly smaller overlap on the snapped
  boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import validate_tensor

MODES = ("full-coverage", "paper-literal")


@dataclass(frozen=True)
class Patch:
    i: int
    e: int  # top (row) of the upper-left corner
    f: int  # left (column)
    side: int


@dataclass(frozen=True)
class PatchPlan:
    H: int
    W: int
    n: int
    n_w: int
    n_h: int
    side: int
    stride: int
    mode: str
    patches: tuple[Patch, ...]

    def as_dict(self) -> dict:
        return {
            "H": self.H,
            "W": self.W,
            "n": self.n,
            "mode": self.mode,
            "side": self.side,
            "stride": self.stride,
            "patches": [
                {"i": p.i, "e": p.e, "f": p.f, "side": p.side} for p in self.patches
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "PatchPlan":
        patches = tuple(
            Patch(i=int(p["i"]), e=int(p["e"]), f=int(p["f"]), side=int(p["side"]))
            for p in d["patches"]
        )
        n = int(d["n"])
        nw = int(math.isqrt(n))
        return PatchPlan(
            H=int(d["H"]), W=int(d["W"]), n=n, n_w=nw, n_h=nw,
            side=int(d["side"]), stride=int(d["stride"]), mode=str(d["mode"]),
            patches=patches,
        )


def plan(H: int, W: int, n: int, mode: str = "full-coverage") -> PatchPlan:
    """Lay out n overlapping square patches over an H x W image."""
    if H != W:
        raise ConfigError(f"only square images are supported, got {H} x {W}")
    if H < 1:
        raise ConfigError(f"image size must be positive, got {H}")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    n_w = math.isqrt(n)
    if n_w * n_w != n or n < 4:
        raise ConfigError(f"n must be a perfect square >= 4, got {n}")
    n_h = n_w
    if mode == "paper-literal":
        side = H // (n_w + 1)
    else:
        side = (2 * H) // (n_w + 1)
    if side < 2:
        raise ConfigError(f"patch side {side} < 2 for H={H}, n={n}, mode={mode}")
    stride = side // 2
    if stride < 1:
        raise ConfigError(f"stride {stride} < 1 for H={H}, n={n}")

    patches = []
    for i in range(n):
        e = (i // n_h) * stride
        f = (i % n_w) * stride
        if mode == "full-coverage":
            # snap the final row/column to end exactly at the image edge
            if i // n_h == n_h - 1:
                e = H - side
            if i % n_w == n_w - 1:
                f = W - side
        if e + side > H or f + side > W:
            raise ConfigError(
                f"patch {i} at ({e},{f}) with side {side} exceeds the {H}x{W} image"
            )
        patches.append(Patch(i=i, e=e, f=f, side=side))
    return PatchPlan(
        H=H, W=W, n=n, n_w=n_w, n_h=n_h, side=side, stride=stride,
        mode=mode, patches=tuple(patches),
    )


def extract(img, patch_plan: PatchPlan) -> list[np.ndarray]:
    """Crop every planned patch from a c x H x W image, ordered by index."""
    a = validate_tensor(img, "image").astype(np.float64, copy=False)
    if a.ndim != 3:
        raise ShapeError(f"image must be c x H x W, got shape {a.shape}")
    _, h, w = a.shape
    if h != patch_plan.H or w != patch_plan.W:
        raise ShapeError(
            f"image is {h} x {w} but the plan was built for {patch_plan.H} x {patch_plan.W}"
        )
    out = []
    for p in patch_plan.patches:
        out.append(a[:, p.e : p.e + p.side, p.f : p.f + p.side].copy())
    return out


def coverage_map(patch_plan: PatchPlan) -> np.ndarray:
    """Per-pixel count of covering patches (H x W int array)."""
    cov = np.zeros((patch_plan.H, patch_plan.W), dtype=np.int64)
    for p in patch_plan.patches:
        cov[p.e : p.e + p.side, p.f : p.f + p.side] += 1
    return cov
