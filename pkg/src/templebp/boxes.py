"""Invariant boxes [v_min, v_max] x [k_min, k_max] used by the limiter."""
from dataclasses import dataclass

import numpy as np

from .mesh import NGHOST

BOX_PAD = 1e-12
DEGENERATE_DX = 1e-14


class DegenerateStencilError(ValueError):
    pass


@dataclass
class Boxes:
    """Per-cell bounds; every field is an array with one entry per cell."""

    vmin: np.ndarray
    vmax: np.ndarray
    kmin: np.ndarray
    kmax: np.ndarray

    def hull(self):
        """Smallest single box containing all cells' boxes."""
        return GlobalBox(float(self.vmin.min()), float(self.vmax.max()),
                         float(self.kmin.min()), float(self.kmax.max()))

    def contains(self, v, k, tol=0.0):
        return ((v >= self.vmin - tol) & (v <= self.vmax + tol)
                & (k >= self.kmin - tol) & (k <= self.kmax + tol))


@dataclass
class GlobalBox:
    vmin: float
    vmax: float
    kmin: float
    kmax: float

    def union(self, other):
        return GlobalBox(min(self.vmin, other.vmin), max(self.vmax, other.vmax),
                         min(self.kmin, other.kmin), max(self.kmax, other.kmax))

    def broadcast(self, n):
        full = lambda val: np.full(n, val)
        return Boxes(full(self.vmin), full(self.vmax), full(self.kmin), full(self.kmax))


def quad_extrema(x0, x1, x2, f0, f1, f2):
    """Min and max over [x0, x2] of the parabola through three points."""
    d01 = x1 - x0
    d12 = x2 - x1
    if np.any(np.abs(d01) < DEGENERATE_DX) or np.any(np.abs(d12) < DEGENERATE_DX):
        raise DegenerateStencilError("two stencil nodes coincide")
    s01 = (f1 - f0) / d01
    s12 = (f2 - f1) / d12
    curv = (s12 - s01) / (x2 - x0)
    lo = np.minimum(np.minimum(f0, f1), f2)
    hi = np.maximum(np.maximum(f0, f1), f2)
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = 0.5 * (x0 + x1) - s01 / (2.0 * curv)
        inside = (curv != 0.0) & (xs > x0) & (xs < x2)
        fs = f0 + s01 * (xs - x0) + curv * (xs - x0) * (xs - x1)
    lo = np.where(inside, np.minimum(lo, fs), lo)
    hi = np.where(inside, np.maximum(hi, fs), hi)
    return lo, hi


def _stencil_indices(n, periodic):
    """Padded-array indices (left, centre, right) of each cell's stencil.

    The last cell always reaches into its right ghost because its first-order
    update reads the ghost speed; the first cell uses a one-sided stencil on
    non-periodic grids because its first-order update never reads the left
    ghost.
    """
    mid = np.arange(n) + NGHOST
    if not periodic:
        mid[0] += 1
    return mid - 1, mid, mid + 1


def _finish(vlo, vhi, klo, khi, v_nodes_min, eps):
    vmin = vlo - eps
    # speeds are non-negative for unidirectional flow; the clamp is applied only
    # where the stencil's own speeds respect it, otherwise the first-order
    # update could not stay in the box
    vmin = np.where(v_nodes_min >= 0.0, np.maximum(vmin, 0.0), vmin)
    return Boxes(vmin, vhi + eps, klo - eps, khi + eps)


def local_boxes(xp, vp, kp, periodic, eps=BOX_PAD):
    """Per-cell boxes from padded positions, speeds and markers."""
    n = xp.size - 2 * NGHOST
    i0, i1, i2 = _stencil_indices(n, periodic)
    vlo, vhi = quad_extrema(xp[i0], xp[i1], xp[i2], vp[i0], vp[i1], vp[i2])
    klo, khi = quad_extrema(xp[i0], xp[i1], xp[i2], kp[i0], kp[i1], kp[i2])
    return _finish(vlo, vhi, klo, khi, np.minimum(np.minimum(vp[i0], vp[i1]), vp[i2]), eps)


def edge_boxes(xp, vp, kp, eps=BOX_PAD):
    """Boxes of the two end cells using centred stencils through the ghosts."""
    n = xp.size - 2 * NGHOST
    c = np.array([NGHOST, NGHOST + n - 1])
    vlo, vhi = quad_extrema(xp[c - 1], xp[c], xp[c + 1], vp[c - 1], vp[c], vp[c + 1])
    klo, khi = quad_extrema(xp[c - 1], xp[c], xp[c + 1], kp[c - 1], kp[c], kp[c + 1])
    vnod = np.minimum(np.minimum(vp[c - 1], vp[c]), vp[c + 1])
    return _finish(vlo, vhi, klo, khi, vnod, eps).hull()


def box_excess(boxes, v, k):
    """Largest amount by which any (v, k) pair leaves its box (<= 0 when inside)."""
    return float(np.max(np.maximum.reduce([boxes.vmin - v, v - boxes.vmax,
                                           boxes.kmin - k, k - boxes.kmax])))
