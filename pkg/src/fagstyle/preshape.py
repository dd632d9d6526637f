"""Projection into the Pre-Shape Space and the geodesic metric on it.

A pre-shape is a 2 x k landmark matrix with zero-mean rows and unit
Frobenius norm, i.e. a point on the unit hypersphere of centered
configurations.  Feature tensors of even element count L map onto 2 x (L/2)
landmarks by a fixed split-half layout: the first half of the row-major
flattening becomes the x row, the second half the y row.  Projection is
centering followed by normalization and is invariant to positive scaling
and per-row translation of the input.

All reductions (means, norms, dot products) use numpy's fixed-order
summation, so results do not depend on thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ShapeError
from .tensor import validate_tensor

# Constructed pre-shapes must satisfy these; projection guarantees them.
CENTER_TOL = 1e-12
NORM_TOL = 1e-12

# Below this post-centering norm the direction is numerically meaningless.
DEGENERATE_NORM = 1e-12

# Inner products this close to +/-1 are indistinguishable from exact
# (co)incidence: arccos has infinite slope at 1, so even bitwise-equal
# inputs produce computed distances of ~sqrt(2 eps) = 2e-8.  Distances and
# curve steps treat anything inside this band as 0 (or pi).
COINCIDENT_DOT = 1.0 - 8.0 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class PreShape:
    """Mean-centered, unit-norm 2 x k landmark matrix."""

    landmarks: np.ndarray

    def __post_init__(self):
        lm = np.asarray(self.landmarks, dtype=np.float64)
        if lm.ndim != 2 or lm.shape[0] != 2:
            raise ShapeError(f"landmarks must be 2 x k, got {lm.shape}")
        if lm.shape[1] < 2:
            raise ShapeError(f"need k >= 2 landmarks, got k={lm.shape[1]}")
        if not np.all(np.isfinite(lm)):
            raise ShapeError("landmarks must be finite")
        means = lm.mean(axis=1)
        if np.max(np.abs(means)) > CENTER_TOL:
            raise ShapeError(f"rows not centered: |row mean| = {np.max(np.abs(means)):.3e}")
        nrm = np.linalg.norm(lm)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ShapeError(f"Frobenius norm {nrm!r} != 1")
        lm = lm.copy()
        lm.flags.writeable = False
        object.__setattr__(self, "landmarks", lm)

    @property
    def k(self) -> int:
        return self.landmarks.shape[1]

    def flat(self) -> np.ndarray:
        """Row-major flattening (x row then y row); read-only view."""
        return self.landmarks.reshape(-1)


def reshape_to_landmarks(t) -> np.ndarray:
    """Split-half reshape of any even-count tensor into 2 x (L/2) landmarks."""
    a = validate_tensor(t).astype(np.float64, copy=False)
    flat = a.reshape(-1)
    if flat.size % 2 != 0:
        raise ShapeError(f"element count {flat.size} is odd; cannot split into 2 rows")
    if flat.size < 4:
        raise ShapeError(f"need at least 4 elements, got {flat.size}")
    return flat.reshape(2, flat.size // 2)


def _center_normalize(landmarks: np.ndarray):
    """Center rows then normalize.  Returns (pre_shape_array, norm)."""
    centered = landmarks - landmarks.mean(axis=1, keepdims=True)
    nrm = float(np.linalg.norm(centered))
    if nrm <= DEGENERATE_NORM:
        raise DegenerateInputError(
            f"post-centering norm {nrm:.3e} <= {DEGENERATE_NORM}; input is constant per row"
        )
    return centered / nrm, nrm


def project(t) -> PreShape:
    """Project a tensor onto the Pre-Shape hypersphere (reshape, center, normalize).

    Idempotent on already-projected inputs up to roundoff; raises
    DegenerateInputError when either coordinate row is constant.
    """
    tau, _ = _center_normalize(reshape_to_landmarks(t))
    return PreShape(tau)


def project_keep_shape(t) -> np.ndarray:
    """Same projection, but the result is reshaped back to the input's shape.

    Used where per-position indexing of the projected feature map must
    survive (self-correlation); the zero-mean / unit-norm constraints hold
    on the split-half view exactly as in ``project``.
    """
    a = validate_tensor(t).astype(np.float64, copy=False)
    tau, _ = _center_normalize(reshape_to_landmarks(a))
    return tau.reshape(a.shape)


def geodesic_distance(a: PreShape, b: PreShape) -> float:
    """Great-circle arc length: arccos of the Frobenius inner product.

    The inner product is clamped to [-1, 1] first so rounding can never
    produce a NaN, and products inside the coincidence band collapse to an
    exact 0 (or pi).  Result lies in [0, pi].
    """
    if a.k != b.k:
        raise ShapeError(f"landmark counts differ: {a.k} != {b.k}")
    dot = float(np.sum(a.landmarks * b.landmarks))
    if dot >= COINCIDENT_DOT:
        return 0.0
    if dot <= -COINCIDENT_DOT:
        return float(np.pi)
    return float(np.arccos(dot))
