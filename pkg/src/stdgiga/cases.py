"""Built-in manufactured problems and multi-patch space-time geometries."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bspline import KnotVector, TensorBasis
from .geometry import GeometryMap, build_multipatch, make_patch

__all__ = [
    "ManufacturedProblem",
    "sine_problem",
    "bilinear_problem",
    "identity_geometry",
    "case_unit_box",
    "case_moving_2d",
    "case_moving_3d",
    "moving_bounds",
    "get_case",
    "CASES",
]


@dataclass(frozen=True)
class ManufacturedProblem:
    """Exact solution of ``u_t - Laplace_x u = f`` with its data.

    Every callback takes physical points of shape ``(M, d + 1)`` (time
    last).  ``grad_x`` returns ``(M, d)``; the others return ``(M,)``.
    """

    name: str
    exact: Callable
    grad_x: Callable
    dt: Callable
    source: Callable
    dirichlet: Callable
    initial: Callable

    def grad(self, pts) -> np.ndarray:
        """Full space-time gradient ``(grad_x u, u_t)``."""
        pts = np.atleast_2d(pts)
        return np.concatenate([self.grad_x(pts), self.dt(pts)[:, None]], axis=1)


def sine_problem(d: int) -> ManufacturedProblem:
    """``u = sin(pi x_1) sin(pi t)``; only the first spatial coordinate enters."""
    pi = np.pi

    def exact(p):
        p = np.atleast_2d(p)
        return np.sin(pi * p[:, 0]) * np.sin(pi * p[:, -1])

    def grad_x(p):
        p = np.atleast_2d(p)
        g = np.zeros((p.shape[0], d))
        g[:, 0] = pi * np.cos(pi * p[:, 0]) * np.sin(pi * p[:, -1])
        return g

    def dt(p):
        p = np.atleast_2d(p)
        return pi * np.sin(pi * p[:, 0]) * np.cos(pi * p[:, -1])

    def source(p):
        p = np.atleast_2d(p)
        return pi * np.sin(pi * p[:, 0]) * (np.cos(pi * p[:, -1]) + pi * np.sin(pi * p[:, -1]))

    return ManufacturedProblem("sine", exact, grad_x, dt, source, exact, exact)


def bilinear_problem(d: int) -> ManufacturedProblem:
    """``u = x_1 t`` with source ``f = x_1``."""

    def exact(p):
        p = np.atleast_2d(p)
        return p[:, 0] * p[:, -1]

    def grad_x(p):
        p = np.atleast_2d(p)
        g = np.zeros((p.shape[0], d))
        g[:, 0] = p[:, -1]
        return g

    def dt(p):
        return np.atleast_2d(p)[:, 0].copy()

    return ManufacturedProblem("bilinear", exact, grad_x, dt, dt, exact, exact)


def identity_geometry(D: int, degree: int = 1) -> GeometryMap:
    """Identity map of the unit box: control points on the Greville grid."""
    basis = TensorBasis(KnotVector([0.0] * (degree + 1) + [1.0] * (degree + 1), degree) for _ in range(D))
    return GeometryMap(basis, basis.greville_grid())


def _box_geometry(lower, upper) -> GeometryMap:
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    g = identity_geometry(lower.size)
    return GeometryMap(g.basis, lower + g.control_points * (upper - lower))


def case_unit_box(d: int = 1):
    """Identity-mapped unit space-time box with exact solution ``u = x_1 t``."""
    if d not in (1, 2):
        raise ValueError("unit-box case supports d in {1, 2}")
    domain = build_multipatch([make_patch(0, identity_geometry(d + 1))])
    return domain, bilinear_problem(d)


# 2D moving domain, degrees (1, 2); rows ordered x-index fastest, then t-index.
_MOVING_2D_LOWER = [(0.0, 0.0), (1.0, 0.0), (-0.25, 0.5), (1.25, 0.5), (0.0, 1.0), (1.0, 1.0)]
_MOVING_2D_UPPER = [(0.0, 1.0), (1.0, 1.0), (0.25, 1.5), (0.75, 1.5), (0.0, 2.0), (1.0, 2.0)]


def moving_bounds(t):
    """Left and right ends ``a(t), b(t)`` of the moving interval traced by the
    control nets, t in [0, 2].

    The interval widens to ``1 + t(1 - t)`` on the lower slab and narrows to
    ``1 - (t - 1)(2 - t)`` on the upper slab; it has unit width at t = 0, 1, 2.
    """
    t = np.asarray(t, dtype=float)
    lower = t <= 1.0
    a = np.where(lower, -t * (1.0 - t) / 2.0, -(t - 1.0) * (t - 2.0) / 2.0)
    b = np.where(lower, 1.0 + t * (1.0 - t) / 2.0, (t * t - 3.0 * t + 4.0) / 2.0)
    return a, b


def _moving_basis(D):
    lin = KnotVector([0, 0, 1, 1], 1)
    quad = KnotVector([0, 0, 0, 1, 1, 1], 2)
    return TensorBasis([lin] * (D - 1) + [quad])


def case_moving_2d():
    """Two time-slab patches over t in (0, 1) and (1, 2) with a moving interval."""
    basis = _moving_basis(2)
    geoms = [GeometryMap(basis, _MOVING_2D_LOWER), GeometryMap(basis, _MOVING_2D_UPPER)]
    domain = build_multipatch([make_patch(i, g) for i, g in enumerate(geoms)])
    return domain, sine_problem(1)


def _moving_3d_net(lower: bool):
    # x-index fastest, then y-index, then t-index
    rows = []
    if lower:
        x_of = {1: (0.0, 1.0), 2: (-0.25, 1.25), 3: (0.0, 1.0)}
        t_of = {1: 0.0, 2: 0.5, 3: 1.0}
    else:
        x_of = {1: (0.0, 1.0), 2: (0.25, 0.75), 3: (0.0, 1.0)}
        t_of = {1: 1.0, 2: 1.5, 3: 2.0}
    for i3 in (1, 2, 3):
        for i2 in (1, 2):
            for i1 in (1, 2):
                rows.append((x_of[i3][i1 - 1], float(i2 - 1), t_of[i3]))
    return rows


def case_moving_3d():
    """Three-dimensional analogue: the interval motion in x_1 extruded along x_2."""
    basis = _moving_basis(3)
    geoms = [GeometryMap(basis, _moving_3d_net(True)), GeometryMap(basis, _moving_3d_net(False))]
    domain = build_multipatch([make_patch(i, g) for i, g in enumerate(geoms)])
    return domain, sine_problem(2)


CASES = {
    "unit-box": case_unit_box,
    "moving-2d": case_moving_2d,
    "moving-3d": case_moving_3d,
}


def get_case(name: str):
    try:
        return CASES[name]()
    except KeyError:
        raise KeyError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None

