"""Gauss-Legendre rules on (0, 1), tensorized element rules and facet rules."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["QuadRule", "gauss_rule", "element_rule", "tensor_rules", "facet_rule", "face_boxes"]

MAX_POINTS = 16


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def _gauss01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    pts, wts = 0.5 * (x + 1.0), 0.5 * w
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def gauss_rule(n: int) -> QuadRule:
    """``n``-point Gauss-Legendre rule on (0, 1), exact up to degree ``2n - 1``."""
    if not 1 <= int(n) <= MAX_POINTS:
        raise ValueError(f"number of Gauss points must lie in [1, {MAX_POINTS}], got {n}")
    pts, wts = _gauss01(int(n))
    return QuadRule(pts, wts)


def tensor_rules(boxes, orders):
    """Tensor Gauss rules on a batch of boxes.

    Parameters
    ----------
    boxes : array_like, shape (E, D, 2)
        Lower and upper bounds per element and direction.
    orders : sequence of int
        Points per direction.

    Returns
    -------
    points : ndarray, shape (E, nq, D)
    weights : ndarray, shape (E, nq)
        Weights include the box measure.  Quadrature points are ordered with
        the first direction varying fastest.
    """
    boxes = np.asarray(boxes, dtype=float)
    E, D, _ = boxes.shape
    rules = [gauss_rule(n) for n in orders]
    lo, hi = boxes[:, :, 0], boxes[:, :, 1]
    grids = np.meshgrid(*[r.points for r in rules], indexing="ij")
    ref = np.stack([g.ravel(order="F") for g in grids], axis=-1)
    wgrids = np.meshgrid(*[r.weights for r in rules], indexing="ij")
    wref = np.prod(np.stack([g.ravel(order="F") for g in wgrids], axis=-1), axis=-1)
    points = lo[:, None, :] + ref[None, :, :] * (hi - lo)[:, None, :]
    weights = wref[None, :] * np.prod(hi - lo, axis=1)[:, None]
    return points, weights


def element_rule(element, orders) -> QuadRule:
    """Tensor Gauss rule on one parametric box ``[(lo, hi), ...]``."""
    pts, wts = tensor_rules(np.asarray(element, dtype=float)[None], orders)
    return QuadRule(pts[0], wts[0])


def face_boxes(breakpoints, axis: int, side: int) -> np.ndarray:
    """Element faces lying on the parametric face ``xi[axis] = side``.

    Returns boxes of shape ``(E, D, 2)`` where the ``axis`` extent is the
    degenerate interval ``(side, side)``.
    """
    D = len(breakpoints)
    axes = []
    for a in range(D):
        if a == axis:
            axes.append(np.array([[float(side), float(side)]]))
        else:
            b = np.asarray(breakpoints[a], dtype=float)
            axes.append(np.stack([b[:-1], b[1:]], axis=-1))
    counts = [ax.shape[0] for ax in axes]
    idx = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
    idx = [i.ravel(order="F") for i in idx]
    return np.stack([axes[a][idx[a]] for a in range(D)], axis=1)


def _face_orders(orders, axis):
    orders = list(orders)
    orders[axis] = 1
    return orders


def facet_points(boxes, axis: int, orders):
    """Gauss points on face boxes with parametric (D-1)-dimensional weights."""
    boxes = np.array(boxes, dtype=float)
    side = boxes[:, axis, 0].copy()
    boxes[:, axis, 0], boxes[:, axis, 1] = 0.0, 1.0
    pts, wts = tensor_rules(boxes, _face_orders(orders, axis))
    pts[:, :, axis] = side[:, None]
    return pts, wts


def facet_rule(geometry, axis: int, side: int, element_face, orders) -> QuadRule:
    """Gauss rule on one element face with physical surface-measure weights.

    ``element_face`` is a box ``[(lo, hi), ...]`` whose ``axis`` extent is
    ignored and replaced by ``side``.
    """
    box = np.array(element_face, dtype=float)
    box[axis] = (side, side)
    pts, wts = facet_points(box[None], axis, orders)
    pts, wts = pts[0], wts[0]
    ds, _ = geometry.surface_measure(pts, axis, side)
    return QuadRule(pts, wts * ds)
