"""Assembly of the space-time dG-IgA system for the heat equation.

The discrete bilinear form combines

* per-patch volume terms
  ``-u v_t + th u_t v_t + grad_x u . grad_x v - th (u_t)_x . grad_x v``,
* terminal-facet terms ``u v + th grad_x u . grad_x v``,
* interior-facet terms: time-upwind coupling of values and spatial
  gradients, the antisymmetric flux terms for ``u`` and ``u_t`` and the two
  jump penalties,

where ``th = theta * h_i`` is taken from the facet owner.  The right-hand
side tests the source with the time-upwind function ``v + th v_t``.
Dirichlet (lateral) and initial data are imposed strongly by Greville
interpolation and eliminated from the system.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .exceptions import ConstraintError
from .bspline import collocation_matrix, greville_abscissae
from .geometry import Facet, FacetKind, MultiPatchDomain, Patch, physical_derivs
from .quadrature import face_boxes, facet_points, tensor_rules

__all__ = [
    "DGParameters",
    "SparseSystem",
    "TraceValues",
    "default_penalties",
    "trace_ops",
    "assemble_matrix",
    "assemble_rhs",
    "assemble_system",
    "apply_constraints",
    "bilinear_form",
]

# upper bound on (points x local functions x D^2) per evaluation batch
_BATCH_ENTRIES = 4_000_000


def default_penalties(p: int, d: int) -> tuple:
    """Penalty rule ``delta1 = delta2 = 2 (p + d + 1)(p + 1)``."""
    if p < 1:
        raise ValueError("degree must be >= 1")
    if d not in (1, 2, 3):
        raise ValueError("spatial dimension must be 1, 2 or 3")
    val = 2.0 * (p + d + 1) * (p + 1)
    return val, val


@dataclass(frozen=True)
class DGParameters:
    theta: float = 0.1
    delta1: float = 24.0
    delta2: float = 24.0
    quad_orders: tuple | None = None

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not (self.delta1 > 0 and self.delta2 > 0):
            raise ValueError("penalty parameters must be positive")

    @classmethod
    def default(cls, p: int, d: int, theta: float = 0.1, quad=None) -> "DGParameters":
        d1, d2 = default_penalties(p, d)
        return cls(theta, d1, d2, None if quad is None else (int(quad),) * (d + 1))

    def orders_for(self, patch: Patch, extra: int = 0) -> tuple:
        """Gauss points per direction: the override, else ``p + 1 + extra``."""
        if self.quad_orders is not None:
            return tuple(int(q) + extra for q in self.quad_orders)
        return tuple(p + 1 + extra for p in patch.space.degrees)


class TraceValues(NamedTuple):
    jump_x: np.ndarray
    jump_t: float
    average: float
    upwind: float
    downwind: float


def trace_ops(v_i, v_j, n_i, boundary: bool = False) -> TraceValues:
    """Jumps, average and time-upwind/downwind values across a facet.

    ``n_i`` is the owner's outward unit normal ``(n_x, n_t)``; the
    neighbor's normal is ``-n_i``.  On boundary facets only ``v_i`` enters.
    """
    n_i = np.asarray(n_i, dtype=float)
    nx, nt = n_i[:-1], n_i[-1]
    if boundary:
        return TraceValues(v_i * nx, v_i * nt, v_i, v_i, v_i)
    jump_x = v_i * nx - v_j * nx
    jump_t = v_i * nt - v_j * nt
    if nt >= 0:
        up, down = v_i, v_j
    else:
        up, down = v_j, v_i
    return TraceValues(jump_x, jump_t, 0.5 * (v_i + v_j), up, down)


@dataclass
class SparseSystem:
    """Reduced linear system on the unconstrained coefficients.

    ``free`` and ``constrained`` are global coefficient indices (patch blocks
    stacked in patch order, see ``MultiPatchDomain.offsets``).
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    constrained: np.ndarray
    constrained_values: np.ndarray
    num_dofs: int
    offsets: np.ndarray = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return self.free.size

    def expand(self, x_free, homogeneous: bool = False) -> np.ndarray:
        """Full coefficient vector from free values plus the constrained data."""
        full = np.zeros(self.num_dofs)
        full[self.free] = x_free
        if not homogeneous:
            full[self.constrained] = self.constrained_values
        return full


# -- evaluation batches ------------------------------------------------------


def element_boxes(patch: Patch) -> np.ndarray:
    bps = patch.space.mesh.breakpoints
    axes = [np.stack([b[:-1], b[1:]], axis=-1) for b in bps]
    idx = np.meshgrid(*[np.arange(a.shape[0]) for a in axes], indexing="ij")
    idx = [i.ravel(order="F") for i in idx]
    return np.stack([a[i] for a, i in zip(axes, idx)], axis=1)


def _batch_size(patch: Patch, nq: int) -> int:
    D = patch.ndim
    per_elem = nq * patch.space.nloc * D * D
    return max(1, _BATCH_ENTRIES // per_elem)


def volume_batches(patch: Patch, orders, second: bool = True):
    """Yield ``(table, weights)`` per batch of elements.

    ``weights`` has shape ``(E, nq)`` and includes ``|det J|``; table arrays
    are reshaped to ``(E, nq, nloc, ...)``.
    """
    boxes = element_boxes(patch)
    nq = int(np.prod(orders))
    step = _batch_size(patch, nq)
    for start in range(0, boxes.shape[0], step):
        pts, wts = tensor_rules(boxes[start: start + step], orders)
        E = pts.shape[0]
        tab = physical_derivs(patch.geometry, patch.space, pts.reshape(-1, patch.ndim), second, patch.id)
        yield _Batch(tab, E, nq, pts.reshape(-1, patch.ndim)), wts * tab.det.reshape(E, nq)


def facet_batches(domain: MultiPatchDomain, facet: Facet, orders, second: bool = True):
    """Yield ``(owner, neighbor, weights, normals)`` per batch of owner element faces.

    ``neighbor`` is ``None`` for boundary facets.  ``normals`` has shape
    ``(E, nq, D)`` and is the owner's outward normal.
    """
    owner = domain.patches[facet.owner]
    axis, side = facet.face
    boxes = face_boxes(owner.space.mesh.breakpoints, axis, side)
    face_orders = list(orders)
    face_orders[axis] = 1
    nq = int(np.prod(face_orders))
    step = _batch_size(owner, nq)
    for start in range(0, boxes.shape[0], step):
        pts, wts = facet_points(boxes[start: start + step], axis, orders)
        E = pts.shape[0]
        flat = pts.reshape(-1, owner.ndim)
        ds, normals = owner.geometry.surface_measure(flat, axis, side, owner.id)
        tab = physical_derivs(owner.geometry, owner.space, flat, second, owner.id)
        nb = None
        if facet.kind is FacetKind.INTERIOR:
            other = domain.patches[facet.neighbor]
            flat_n = facet.to_neighbor(flat)
            tab_n = physical_derivs(other.geometry, other.space, flat_n, second, other.id)
            nb = _Batch(tab_n, E, nq, flat_n)
        yield _Batch(tab, E, nq, flat), nb, wts * ds.reshape(E, nq), normals.reshape(E, nq, -1)


class _Batch:
    """Physical table reshaped to ``(E, nq, nloc, ...)``."""

    def __init__(self, tab, E, nq, param_points=None):
        nl = tab.values.shape[1]
        self.param_points = param_points
        self.E, self.nq, self.nloc = E, nq, nl
        self.indices_q = tab.indices.reshape(E, nq, nl)
        self.V = tab.values.reshape(E, nq, nl)
        self.G = tab.grad.reshape(E, nq, nl, -1)
        self.Gx = self.G[..., :-1]
        self.Gt = self.G[..., -1]
        self.H = None if tab.dt_grad_x is None else tab.dt_grad_x.reshape(E, nq, nl, -1)
        self.points = tab.points.reshape(E, nq, -1)

    @property
    def uniform_support(self) -> bool:
        return bool(np.all(self.indices_q == self.indices_q[:, :1, :]))

    @property
    def indices(self):
        return self.indices_q[:, 0, :]


# -- local matrices ----------------------------------------------------------


def _local(w, Fv, Fu):
    """``A[e, a, b] = sum_{q,k} w[e,q] Fv[e,q,a,k] Fu[e,q,b,k]``."""
    E, nq, na, K = Fv.shape
    nb = Fu.shape[2]
    left = (Fv * w[:, :, None, None]).transpose(0, 2, 1, 3).reshape(E, na, nq * K)
    right = Fu.transpose(0, 1, 3, 2).reshape(E, nq * K, nb)
    return left @ right


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, block):
        E, na, nb = block.shape
        self.rows.append(np.broadcast_to(rows[:, :, None], (E, na, nb)).ravel())
        self.cols.append(np.broadcast_to(cols[:, None, :], (E, na, nb)).ravel())
        self.vals.append(block.ravel())

    def matrix(self, n):
        if not self.vals:
            return sp.csr_matrix((n, n))
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        vals = np.concatenate(self.vals)
        return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _volume_features(b: _Batch, th: float):
    Fv = np.concatenate([-b.Gt[..., None], th * b.Gt[..., None], b.Gx, -th * b.Gx], axis=-1)
    Fu = np.concatenate([b.V[..., None], b.Gt[..., None], b.Gx, b.H], axis=-1)
    return Fv, Fu


def _terminal_features(b: _Batch, th: float):
    Fv = np.concatenate([b.V[..., None], th * b.Gx], axis=-1)
    Fu = np.concatenate([b.V[..., None], b.Gx], axis=-1)
    return Fv, Fu


def _interior_features(test: _Batch, trial: _Batch, c_v, c_u, up_u, normals, th, pen1, delta2):
    """Test/trial feature pairs for one (test side, trial side) block.

    ``c_v, c_u`` are +1 for the owner side and -1 for the neighbor side;
    ``up_u`` (per point) is 1 where the trial side is the upwind side.
    Trial features are ``(u, grad_x u, u_t)``.
    """
    nt = normals[..., -1][..., None]
    nx = normals[..., :-1][:, :, None, :]
    nx2 = np.sum(normals[..., :-1] ** 2, axis=-1)[..., None]
    up = up_u[..., None]
    gxn = np.sum(test.Gx * nx, axis=-1)
    f_val = c_v * nt * up * test.V + 0.5 * c_u * gxn + pen1 * c_u * c_v * nx2 * test.V
    f_grad = (
        th * c_v * (nt * up)[..., None] * test.Gx
        - 0.5 * c_v * test.V[..., None] * nx
        - 0.5 * th * c_v * test.Gt[..., None] * nx
    )
    f_dt = 0.5 * th * c_u * gxn + delta2 * th * c_u * c_v * nx2 * test.Gt
    Fv = np.concatenate([f_val[..., None], f_grad, f_dt[..., None]], axis=-1)
    Fu = np.concatenate([trial.V[..., None], trial.Gx, trial.Gt[..., None]], axis=-1)
    return Fv, Fu


def _per_point(b: _Batch) -> _Batch:
    """View a batch as one 'element' per quadrature point."""
    out = object.__new__(_Batch)
    E, nq, nl = b.E, b.nq, b.nloc
    out.E, out.nq, out.nloc = E * nq, 1, nl
    out.indices_q = b.indices_q.reshape(E * nq, 1, nl)
    out.V = b.V.reshape(E * nq, 1, nl)
    out.G = b.G.reshape(E * nq, 1, nl, -1)
    out.Gx, out.Gt = out.G[..., :-1], out.G[..., -1]
    out.H = None if b.H is None else b.H.reshape(E * nq, 1, nl, -1)
    out.points = b.points.reshape(E * nq, 1, -1)
    out.param_points = b.param_points
    return out


def assemble_matrix(domain: MultiPatchDomain, params: DGParameters) -> sp.csr_matrix:
    """Matrix of the bilinear form on all coefficients (rows test, columns trial)."""
    offsets = domain.offsets
    trip = _Triplets()
    for patch in domain.patches:
        th = params.theta * patch.h
        orders = params.orders_for(patch)
        for b, w in volume_batches(patch, orders):
            Fv, Fu = _volume_features(b, th)
            idx = b.indices + offsets[patch.id]
            trip.add(idx, idx, _local(w, Fv, Fu))

    for facet in domain.facets:
        owner = domain.patches[facet.owner]
        th = params.theta * owner.h
        orders = params.orders_for(owner)
        if facet.kind is FacetKind.TERMINAL:
            for b, _, w, _ in facet_batches(domain, facet, orders, second=False):
                Fv, Fu = _terminal_features(b, th)
                idx = b.indices + offsets[owner.id]
                trip.add(idx, idx, _local(w, Fv, Fu))
        elif facet.kind is FacetKind.INTERIOR:
            pen1 = params.delta1 / owner.h
            for bo, bn, w, normals in facet_batches(domain, facet, orders, second=False):
                if not bn.uniform_support:
                    bo, bn = _per_point(bo), _per_point(bn)
                    w = w.reshape(-1, 1)
                    normals = normals.reshape(-1, 1, normals.shape[-1])
                up_o = (normals[..., -1] >= 0).astype(float)
                sides = (
                    (bo, 1.0, up_o, offsets[facet.owner]),
                    (bn, -1.0, 1.0 - up_o, offsets[facet.neighbor]),
                )
                for test, c_v, _, off_v in sides:
                    for trial, c_u, up_u, off_u in sides:
                        Fv, Fu = _interior_features(
                            test, trial, c_v, c_u, up_u, normals, th, pen1, params.delta2
                        )
                        trip.add(test.indices + off_v, trial.indices + off_u, _local(w, Fv, Fu))
    return trip.matrix(domain.num_dofs)


def assemble_rhs(domain: MultiPatchDomain, source, params: DGParameters) -> np.ndarray:
    """Load vector ``sum_i int f (v + theta h_i v_t)``."""
    rhs = np.zeros(domain.num_dofs)
    offsets = domain.offsets
    for patch in domain.patches:
        th = params.theta * patch.h
        for b, w in volume_batches(patch, params.orders_for(patch), second=False):
            f = source(b.points.reshape(-1, patch.ndim)).reshape(b.E, b.nq)
            local = np.einsum("eq,eqa->ea", w * f, b.V + th * b.Gt)
            np.add.at(rhs, b.indices + offsets[patch.id], local)
    return rhs


def bilinear_form(matrix, u, v) -> float:
    """``a_h(u, v)`` for coefficient vectors (``matrix`` from ``assemble_matrix``)."""
    return float(v @ (matrix @ u))


def face_dofs(patch: Patch, face) -> np.ndarray:
    """Local indices of the coefficients whose functions do not vanish on a face."""
    axis, side = face
    shape = patch.space.shape
    ranges = [np.arange(n) for n in shape]
    ranges[axis] = np.array([0 if side == 0 else shape[axis] - 1])
    grid = np.meshgrid(*ranges, indexing="ij")
    multi = np.stack([g.ravel() for g in grid], axis=-1)
    return patch.space.flat_index(multi)


def _face_interpolant(patch: Patch, face, data) -> tuple:
    """Interpolate ``data`` on a face at the tangential Greville grid."""
    axis, side = face
    space = patch.space
    D = space.ndim
    tang = [a for a in range(D) if a != axis]
    greville = [greville_abscissae(space.directions[a]) for a in tang]
    grid = np.meshgrid(*greville, indexing="ij")
    pts = np.zeros((grid[0].size, D))
    for a, g in zip(tang, grid):
        pts[:, a] = g.ravel()
    pts[:, axis] = float(side)
    values = np.asarray(data(patch.geometry.map_points(pts)), dtype=float).reshape(grid[0].shape)
    coeffs = values
    try:
        for k, a in enumerate(tang):
            C = collocation_matrix(space.directions[a], greville[k])
            moved = np.moveaxis(coeffs, k, 0)
            sol = np.linalg.solve(C, moved.reshape(moved.shape[0], -1)).reshape(moved.shape)
            coeffs = np.moveaxis(sol, 0, k)
    except np.linalg.LinAlgError as exc:
        raise ConstraintError(f"singular interpolation on patch {patch.id} face {face}") from exc
    return face_dofs(patch, face), coeffs.ravel()


def apply_constraints(domain: MultiPatchDomain, problem) -> tuple:
    """Strongly imposed coefficients on initial and lateral Dirichlet facets.

    Returns ``(indices, values)`` with global coefficient indices in
    increasing order.
    """
    fixed = np.full(domain.num_dofs, np.nan)
    offsets = domain.offsets
    ordered = sorted(
        (f for f in domain.facets if f.kind in (FacetKind.DIRICHLET, FacetKind.INITIAL)),
        key=lambda f: f.kind is FacetKind.INITIAL,
    )
    for facet in ordered:
        patch = domain.patches[facet.owner]
        data = problem.initial if facet.kind is FacetKind.INITIAL else problem.dirichlet
        local, vals = _face_interpolant(patch, facet.face, data)
        fixed[local + offsets[patch.id]] = vals
    idx = np.flatnonzero(~np.isnan(fixed))
    return idx, fixed[idx]


def assemble_system(domain: MultiPatchDomain, problem, params: DGParameters) -> SparseSystem:
    """Assemble, impose boundary data strongly and eliminate constrained coefficients."""
    A = assemble_matrix(domain, params)
    b = assemble_rhs(domain, problem.source, params)
    cidx, cval = apply_constraints(domain, problem)
    mask = np.ones(domain.num_dofs, dtype=bool)
    mask[cidx] = False
    free = np.flatnonzero(mask)
    A_ff = A[free][:, free].tocsr()
    rhs = b[free] - A[free][:, cidx] @ cval
    return SparseSystem(A_ff, rhs, free, cidx, cval, domain.num_dofs, domain.offsets)
