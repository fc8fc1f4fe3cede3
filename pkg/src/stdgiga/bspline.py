"""Univariate and tensor-product B-spline spaces on the unit parameter box.

Basis evaluation works on batches of points and only ever returns the
``p + 1`` functions that are nonzero on the knot span containing each point,
together with the span index.  Global indices of tensor-product functions are
lexicographic with the first parametric direction varying fastest.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .exceptions import DomainError

__all__ = [
    "KnotVector",
    "TensorBasis",
    "ParametricMesh",
    "BasisTable",
    "open_knot_vector",
    "find_spans",
    "eval_basis_derivs",
    "basis_derivs_batch",
    "tensor_eval",
    "refine_uniform",
    "greville_abscissae",
    "collocation_matrix",
]

# tolerance for points that fall just outside [0, 1] through round-off
_CLIP_TOL = 1e-12


class KnotVector:
    """Open knot vector with its spline degree.

    Parameters
    ----------
    values : array_like
        Non-decreasing knot sequence.  Knots spanning an interval other
        than ``[0, 1]`` are rescaled to the unit interval.
    degree : int
        Spline degree ``p >= 1``.
    """

    __slots__ = ("_values", "_degree")

    def __init__(self, values, degree: int):
        kv = np.array(values, dtype=float).ravel()
        p = int(degree)
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {degree}")
        if kv.size < 2 * (p + 1):
            raise ValueError("knot vector too short for the given degree")
        if np.any(np.diff(kv) < 0):
            raise ValueError("knot vector must be non-decreasing")
        a, b = kv[0], kv[-1]
        if not b > a:
            raise ValueError("knot vector must span an interval of positive length")
        if a != 0.0 or b != 1.0:
            kv = (kv - a) / (b - a)
            kv[0], kv[-1] = 0.0, 1.0
        if np.any(kv[: p + 1] != 0.0) or np.any(kv[-(p + 1):] != 1.0):
            raise ValueError("knot vector must be open (end knots repeated p+1 times)")
        if kv[p + 1] == 0.0 or kv[-(p + 2)] == 1.0:
            raise ValueError("end knots repeated more than p+1 times")
        _, counts = np.unique(kv[p + 1: -(p + 1)], return_counts=True)
        if counts.size and counts.max() > p:
            raise ValueError("interior knot multiplicity exceeds the degree")
        kv.setflags(write=False)
        self._values = kv
        self._degree = p

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def degree(self) -> int:
        return self._degree

    p = degree

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self._values.size - self._degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self._values)

    @property
    def num_elements(self) -> int:
        return self.breakpoints.size - 1

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self._degree == other._degree and np.array_equal(self._values, other._values)

    def __hash__(self):
        return hash((self._degree, self._values.tobytes()))

    def __repr__(self):
        return f"KnotVector({self._values.tolist()}, degree={self._degree})"


def open_knot_vector(degree: int, num_elements: int) -> KnotVector:
    """Uniform open knot vector with maximal smoothness."""
    inner = np.linspace(0.0, 1.0, num_elements + 1)[1:-1]
    return KnotVector(np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)]), degree)


def _check_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < -_CLIP_TOL) or np.any(x > 1.0 + _CLIP_TOL) or np.any(np.isnan(x)):
        bad = x[(x < -_CLIP_TOL) | (x > 1.0 + _CLIP_TOL) | np.isnan(x)]
        raise DomainError(f"parametric coordinate outside [0, 1]: {bad.ravel()[:5]}")
    return np.clip(x, 0.0, 1.0)


def find_spans(kv: KnotVector, x) -> np.ndarray:
    """Knot span indices for points ``x``; the last span is used at ``x = 1``."""
    x = _check_points(x)
    spans = np.searchsorted(kv.values, x, side="right") - 1
    return np.clip(spans, kv.degree, kv.n - 1)


def basis_derivs_batch(kv: KnotVector, x, nder: int):
    """Nonzero basis functions and derivatives at many points.

    Returns ``(spans, ders)`` with ``ders`` of shape ``(len(x), nder + 1, p + 1)``;
    ``ders[m, k, r]`` is the k-th derivative of function ``spans[m] - p + r``.
    Derivative orders above the degree are returned as zeros.
    """
    x = _check_points(np.atleast_1d(x)).ravel()
    p = kv.degree
    knots = kv.values
    spans = find_spans(kv, x)
    npts = x.size
    n = min(nder, p)

    ndu = np.zeros((npts, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((npts, p + 1))
    right = np.zeros((npts, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = _safe_div(ndu[:, r, j - 1], ndu[:, j, r])
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((npts, nder + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    for r in range(p + 1):
        a = np.zeros((2, npts, p + 1))
        a[0, :, 0] = 1.0
        s1, s2 = 0, 1
        for k in range(1, n + 1):
            d = np.zeros(npts)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, :, 0] = _safe_div(a[s1, :, 0], ndu[:, pk + 1, rk])
                d += a[s2, :, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, :, j] = _safe_div(a[s1, :, j] - a[s1, :, j - 1], ndu[:, pk + 1, rk + j])
                d += a[s2, :, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[s2, :, k] = _safe_div(-a[s1, :, k - 1], ndu[:, pk + 1, r])
                d += a[s2, :, k] * ndu[:, r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, n + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return spans, ders


def _safe_div(num, den):
    # 0/0 and x/0 are defined as zero in the recursion
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den != 0.0)
    return out


def eval_basis_derivs(kv: KnotVector, xi: float, max_deriv: int = 0):
    """Evaluate the ``p + 1`` nonzero basis functions at a single point.

    Returns ``(span, table)`` where ``table[k]`` holds the k-th derivatives of
    functions ``span - p, ..., span``.
    """
    if max_deriv < 0 or max_deriv > kv.degree:
        raise ValueError(f"max_deriv must lie in [0, {kv.degree}], got {max_deriv}")
    spans, ders = basis_derivs_batch(kv, [xi], max_deriv)
    return int(spans[0]), ders[0]


def refine_uniform(kv: KnotVector, levels: int = 1) -> KnotVector:
    """Bisect every nonzero knot span ``levels`` times."""
    if levels < 0:
        raise ValueError("levels must be non-negative")
    values = kv.values
    for _ in range(levels):
        bp = np.unique(values)
        mids = 0.5 * (bp[:-1] + bp[1:])
        values = np.sort(np.concatenate([values, mids]))
    return KnotVector(values, kv.degree)


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    p, t = kv.degree, kv.values
    g = np.array([t[i + 1: i + p + 1].mean() for i in range(kv.n)])
    g[0], g[-1] = 0.0, 1.0
    return g


def collocation_matrix(kv: KnotVector, x) -> np.ndarray:
    """Dense matrix ``C[m, i] = B_i(x_m)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    spans, ders = basis_derivs_batch(kv, x, 0)
    mat = np.zeros((x.size, kv.n))
    cols = spans[:, None] - kv.degree + np.arange(kv.degree + 1)
    np.put_along_axis(mat, cols, ders[:, 0, :], axis=1)
    return mat


@dataclass(frozen=True)
class ParametricMesh:
    """Breakpoints per direction and the resulting axis-aligned elements."""

    breakpoints: tuple

    @property
    def shape(self) -> tuple:
        return tuple(b.size - 1 for b in self.breakpoints)

    @property
    def num_elements(self) -> int:
        return int(np.prod(self.shape))

    def elements(self) -> list:
        """Element boxes ``[(lo, hi), ...]``, first direction fastest."""
        out = []
        for multi in product(*(range(s) for s in reversed(self.shape))):
            multi = multi[::-1]
            out.append(
                tuple((float(b[i]), float(b[i + 1])) for b, i in zip(self.breakpoints, multi))
            )
        return out


@dataclass(frozen=True)
class BasisTable:
    """Nonzero tensor-product basis functions at a batch of points.

    ``indices`` and ``values`` have shape ``(M, nloc)``; ``grad`` is
    ``(M, nloc, D)`` and ``hess`` is ``(M, nloc, D, D)`` (``None`` when not
    requested).  Derivatives are with respect to the parameter coordinates.
    """

    indices: np.ndarray
    values: np.ndarray
    grad: np.ndarray | None = None
    hess: np.ndarray | None = None


class TensorBasis:
    """Tensor product of univariate B-spline bases, one per parametric direction."""

    def __init__(self, directions):
        self.directions = tuple(directions)
        if not self.directions:
            raise ValueError("need at least one direction")

    @classmethod
    def uniform(cls, degrees, num_elements) -> "TensorBasis":
        if np.isscalar(num_elements):
            num_elements = [num_elements] * len(degrees)
        return cls(open_knot_vector(p, ne) for p, ne in zip(degrees, num_elements))

    @property
    def ndim(self) -> int:
        return len(self.directions)

    @property
    def degrees(self) -> tuple:
        return tuple(kv.degree for kv in self.directions)

    @property
    def shape(self) -> tuple:
        return tuple(kv.n for kv in self.directions)

    @property
    def dimension(self) -> int:
        return int(np.prod(self.shape))

    @property
    def nloc(self) -> int:
        return int(np.prod([p + 1 for p in self.degrees]))

    @property
    def mesh(self) -> ParametricMesh:
        return ParametricMesh(tuple(kv.breakpoints for kv in self.directions))

    def strides(self) -> np.ndarray:
        return np.cumprod((1,) + self.shape[:-1])

    def flat_index(self, multi) -> np.ndarray:
        """Global index of a multi-index (last axis of ``multi``)."""
        return np.asarray(multi) @ self.strides()

    def multi_index(self, flat) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(flat), self.shape, order="F"), axis=-1)

    def greville_grid(self) -> np.ndarray:
        """Greville points as an array ``(dimension, D)`` in global index order."""
        axes = [greville_abscissae(kv) for kv in self.directions]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=-1)

    def refine(self, levels: int = 1) -> "TensorBasis":
        return TensorBasis(refine_uniform(kv, levels) for kv in self.directions)

    def evaluate(self, points, max_deriv: int = 0) -> BasisTable:
        return tensor_eval(self, points, max_deriv)

    def __eq__(self, other):
        return isinstance(other, TensorBasis) and self.directions == other.directions

    def __hash__(self):
        return hash(self.directions)

    def __repr__(self):
        return f"TensorBasis(degrees={self.degrees}, shape={self.shape})"


def _outer(factors) -> np.ndarray:
    """Batched tensor product, first factor's index varying fastest."""
    out = factors[0]
    for f in factors[1:]:
        out = (f[:, :, None] * out[:, None, :]).reshape(out.shape[0], -1)
    return out


def tensor_eval(tb: TensorBasis, points, max_deriv: int = 0) -> BasisTable:
    """Nonzero tensor-product basis functions and parametric derivatives.

    ``points`` has shape ``(M, D)`` (a single point of shape ``(D,)`` is
    accepted).  ``max_deriv`` is the highest total derivative order, at most 2.
    Second derivatives in a direction of degree 1 are returned as zero.
    """
    if max_deriv < 0 or max_deriv > 2:
        raise ValueError("max_deriv must be 0, 1 or 2")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    D = tb.ndim
    if pts.shape[-1] != D:
        raise ValueError(f"expected points with {D} coordinates, got shape {pts.shape}")
    M = pts.shape[0]

    univ = [basis_derivs_batch(kv, pts[:, a], max_deriv) for a, kv in enumerate(tb.directions)]
    local = [sp[:, None] - kv.degree + np.arange(kv.degree + 1) for (sp, _), kv in zip(univ, tb.directions)]
    strides = tb.strides()
    indices = local[0] * strides[0]
    for loc, s in zip(local[1:], strides[1:]):
        indices = ((loc * s)[:, :, None] + indices[:, None, :]).reshape(M, -1)

    ders = [d for _, d in univ]
    values = _outer([d[:, 0, :] for d in ders])
    grad = hess = None
    if max_deriv >= 1:
        grad = np.empty((M, values.shape[1], D))
        for a in range(D):
            grad[:, :, a] = _outer([d[:, 1 if b == a else 0, :] for b, d in enumerate(ders)])
    if max_deriv >= 2:
        hess = np.empty((M, values.shape[1], D, D))
        for a in range(D):
            for b in range(a, D):
                orders = [0] * D
                orders[a] += 1
                orders[b] += 1
                hess[:, :, a, b] = _outer([d[:, orders[c], :] for c, d in enumerate(ders)])
                hess[:, :, b, a] = hess[:, :, a, b]
    return BasisTable(indices=indices, values=values, grad=grad, hess=hess)
