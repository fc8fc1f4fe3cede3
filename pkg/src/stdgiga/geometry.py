"""Geometry maps, physical basis derivatives and multi-patch topology.

Physical coordinates are ordered ``(x_1, ..., x_d, t)``: time is always the
last coordinate, both in parameter space and in physical space.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import product
from pathlib import Path

import numpy as np

from .bspline import KnotVector, TensorBasis, tensor_eval
from .exceptions import GeometryError, TopologyError, UnsupportedConfigurationError
from .quadrature import tensor_rules

__all__ = [
    "GeometryMap",
    "Patch",
    "FacetKind",
    "Facet",
    "MultiPatchDomain",
    "PhysicalTable",
    "make_patch",
    "map_point",
    "jacobian",
    "physical_derivs",
    "build_multipatch",
    "facet_normal",
    "load_geometry",
    "dump_geometry",
]


class GeometryMap:
    """Polynomial B-spline map from the unit box onto a space-time patch.

    ``control_points`` has one row per basis function, in the basis' global
    (lexicographic, first direction fastest) order.
    """

    def __init__(self, basis: TensorBasis, control_points, check: bool = True):
        cp = np.array(control_points, dtype=float)
        if cp.ndim != 2 or cp.shape[0] != basis.dimension:
            raise ValueError(
                f"expected {basis.dimension} control points, got array of shape {cp.shape}"
            )
        if cp.shape[1] != basis.ndim:
            raise ValueError("physical and parametric dimensions must agree")
        cp.setflags(write=False)
        self.basis = basis
        self.control_points = cp
        if check:
            self.check_jacobian()

    @property
    def ndim(self) -> int:
        return self.basis.ndim

    def map_points(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        tab = tensor_eval(self.basis, pts, 0)
        return np.einsum("ml,mlk->mk", tab.values, self.control_points[tab.indices])

    def derivatives(self, pts, order: int = 1):
        """Return ``(X, J, H)`` with ``J[m, k, a] = dPhi_k/dxi_a`` and
        ``H[m, k, a, b]`` the parametric Hessian of component ``k`` (or ``None``)."""
        pts = np.atleast_2d(pts)
        tab = tensor_eval(self.basis, pts, order)
        cp = self.control_points[tab.indices]
        X = np.einsum("ml,mlk->mk", tab.values, cp)
        J = np.einsum("mla,mlk->mka", tab.grad, cp)
        H = np.einsum("mlab,mlk->mkab", tab.hess, cp) if order >= 2 else None
        return X, J, H

    def jacobian(self, pts, patch_id=None):
        """Jacobian matrices, determinants and inverses; raises on ``det <= 0``."""
        pts = np.atleast_2d(pts)
        _, J, _ = self.derivatives(pts, 1)
        det = np.linalg.det(J)
        _raise_if_inverted(det, pts, patch_id)
        return J, det, np.linalg.inv(J)

    def surface_measure(self, pts, axis: int, side: int, patch_id=None):
        """Surface Jacobian and outward unit normal on the face ``xi[axis] = side``."""
        J, det, Jinv = self.jacobian(pts, patch_id)
        cof = det[:, None] * Jinv[:, axis, :]
        ds = np.linalg.norm(cof, axis=1)
        if np.any(ds <= 1e-14 * max(1.0, float(np.abs(self.control_points).max()))):
            raise GeometryError(f"degenerate tangent plane on face (axis={axis}, side={side})")
        sign = 1.0 if side == 1 else -1.0
        return ds, sign * cof / ds[:, None]

    def check_jacobian(self, npts: int = 4, patch_id=None) -> None:
        boxes = _mesh_boxes(self.basis.mesh.breakpoints)
        pts, _ = tensor_rules(boxes, [npts] * self.ndim)
        self.jacobian(pts.reshape(-1, self.ndim), patch_id)

    def to_dict(self) -> dict:
        return {
            "degrees": list(self.basis.degrees),
            "knots": [kv.values.tolist() for kv in self.basis.directions],
            "control_points": self.control_points.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeometryMap":
        degrees = data["degrees"]
        knots = data["knots"]
        if len(degrees) != len(knots):
            raise ValueError("'degrees' and 'knots' must have the same length")
        basis = TensorBasis(KnotVector(k, p) for k, p in zip(knots, degrees))
        return cls(basis, data["control_points"])


def _raise_if_inverted(det, pts, patch_id):
    bad = ~(det > 0)
    if np.any(bad):
        where = np.asarray(pts)[np.argmax(bad)]
        who = "" if patch_id is None else f"patch {patch_id}, "
        raise GeometryError(
            f"non-positive Jacobian determinant {det[np.argmax(bad)]:.3e} ({who}xi={where.tolist()})"
        )


def _mesh_boxes(breakpoints) -> np.ndarray:
    """All element boxes ``(E, D, 2)`` of a tensor mesh, first direction fastest."""
    axes = [np.stack([b[:-1], b[1:]], axis=-1) for b in breakpoints]
    idx = np.meshgrid(*[np.arange(a.shape[0]) for a in axes], indexing="ij")
    idx = [i.ravel(order="F") for i in idx]
    return np.stack([a[i] for a, i in zip(axes, idx)], axis=1)


def map_point(g: GeometryMap, xi) -> np.ndarray:
    """Physical image of one parametric point (or a batch ``(M, D)``)."""
    xi = np.asarray(xi, dtype=float)
    X = g.map_points(np.atleast_2d(xi))
    return X[0] if xi.ndim == 1 else X


def jacobian(g: GeometryMap, xi):
    """``(J, det, J^{-1})`` at one parametric point."""
    J, det, inv = g.jacobian(np.atleast_2d(xi))
    return J[0], float(det[0]), inv[0]


@dataclass(frozen=True)
class PhysicalTable:
    """Nonzero basis functions with derivatives in physical coordinates.

    ``grad[..., :d]`` is the spatial gradient and ``grad[..., d]`` the time
    derivative; ``dt_grad_x`` holds the mixed derivatives ``d/dt d/dx_k``.
    """

    indices: np.ndarray
    values: np.ndarray
    grad: np.ndarray
    dt_grad_x: np.ndarray | None
    points: np.ndarray
    det: np.ndarray

    @property
    def grad_x(self) -> np.ndarray:
        return self.grad[..., :-1]

    @property
    def dt(self) -> np.ndarray:
        return self.grad[..., -1]


def physical_derivs(g: GeometryMap, space: TensorBasis, xi, second: bool = True, patch_id=None) -> PhysicalTable:
    """Push parametric basis derivatives of ``space`` forward through ``g``.

    First derivatives use ``J^{-T}`` times the parametric gradient.  The
    mixed second derivatives come from the second-order chain rule
    ``J^{-T} (H_hat - sum_k (grad B)_k H_hat(Phi_k)) J^{-1}``.
    """
    pts = np.atleast_2d(np.asarray(xi, dtype=float))
    D = space.ndim
    X, J, HPhi = g.derivatives(pts, 2 if second else 1)
    det = np.linalg.det(J)
    _raise_if_inverted(det, pts, patch_id)
    Jinv = np.linalg.inv(J)
    tab = tensor_eval(space, pts, 2 if second else 1)
    grad = np.einsum("mak,mla->mlk", Jinv, tab.grad)
    mixed = None
    if second:
        corr = tab.hess - np.einsum("mlk,mkab->mlab", grad, HPhi)
        mixed = np.einsum("ma,mlab,mbj->mlj", Jinv[:, :, D - 1], corr, Jinv[:, :, : D - 1])
    return PhysicalTable(tab.indices, tab.values, grad, mixed, X, det)


def element_diameters(g: GeometryMap, space: TensorBasis) -> np.ndarray:
    """Per-element size ``h_K``: longest corner-to-corner diagonal of the mapped element."""
    bps = space.mesh.breakpoints
    D = len(bps)
    grid = np.meshgrid(*bps, indexing="ij")
    pts = np.stack([c.ravel() for c in grid], axis=-1)
    X = g.map_points(pts).reshape(tuple(b.size for b in bps) + (D,))
    diam = np.zeros(tuple(b.size - 1 for b in bps))
    for bits in product((0, 1), repeat=D - 1):
        bits = (0,) + bits
        lo = tuple(slice(0, -1) if b == 0 else slice(1, None) for b in bits)
        hi = tuple(slice(1, None) if b == 0 else slice(0, -1) for b in bits)
        diam = np.maximum(diam, np.linalg.norm(X[lo] - X[hi], axis=-1))
    return diam.ravel(order="F")


@dataclass(frozen=True)
class Patch:
    """One space-time patch: its geometry, discretization space and mesh size."""

    id: int
    geometry: GeometryMap
    space: TensorBasis
    h: float
    quasi_uniformity: float = 1.0

    @property
    def ndim(self) -> int:
        return self.geometry.ndim


def make_patch(pid: int, geometry: GeometryMap, space: TensorBasis | None = None) -> Patch:
    if space is None:
        space = geometry.basis
    if space.ndim != geometry.ndim:
        raise ValueError("space and geometry dimensions differ")
    hk = element_diameters(geometry, space)
    h = float(hk.max())
    return Patch(pid, geometry, space, h, h / float(hk.min()))


class FacetKind(str, Enum):
    INTERIOR = "Interior"
    DIRICHLET = "Dirichlet"
    INITIAL = "Initial"
    TERMINAL = "Terminal"


@dataclass(frozen=True)
class Facet:
    """A patch face classified as interior interface or boundary piece.

    For interior facets ``map_matrix`` and ``map_offset`` send owner
    parametric points on ``face`` to neighbor parametric points on
    ``neighbor_face``: ``xi_j = A @ xi_i + c``.
    """

    kind: FacetKind
    owner: int
    face: tuple
    neighbor: int | None = None
    neighbor_face: tuple | None = None
    map_matrix: np.ndarray | None = field(default=None, repr=False)
    map_offset: np.ndarray | None = field(default=None, repr=False)

    @property
    def axis(self) -> int:
        return self.face[0]

    @property
    def side(self) -> int:
        return self.face[1]

    def to_neighbor(self, pts) -> np.ndarray:
        if self.kind is not FacetKind.INTERIOR:
            raise ValueError("only interior facets have a neighbor")
        out = np.asarray(pts) @ self.map_matrix.T + self.map_offset
        return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class MultiPatchDomain:
    patches: tuple
    facets: tuple

    @property
    def ndim(self) -> int:
        return self.patches[0].ndim

    @property
    def spatial_dim(self) -> int:
        return self.ndim - 1

    def patch(self, pid: int) -> Patch:
        return self.patches[pid]

    def facets_of(self, kind: FacetKind) -> list:
        return [f for f in self.facets if f.kind is kind]

    def counts(self) -> dict:
        return {k.value: len(self.facets_of(k)) for k in FacetKind}

    @property
    def offsets(self) -> np.ndarray:
        """Start of each patch's block in the global coefficient vector."""
        return np.concatenate([[0], np.cumsum([p.space.dimension for p in self.patches])])

    @property
    def num_dofs(self) -> int:
        return int(self.offsets[-1])

    def discretize(self, degree: int, level: int) -> "MultiPatchDomain":
        """Fresh degree-``degree`` spaces with ``2**level`` elements per direction."""
        if degree < 1:
            raise ValueError("degree must be >= 1")
        patches = []
        for p in self.patches:
            space = TensorBasis.uniform((degree,) * p.ndim, 2 ** level)
            patches.append(make_patch(p.id, p.geometry, space))
        return replace(self, patches=tuple(patches))

    def facet_normal(self, facet: Facet, xi) -> np.ndarray:
        return facet_normal(self.patches[facet.owner].geometry, facet.face, xi)

    def volume(self, npts: int = 4) -> float:
        total = 0.0
        for p in self.patches:
            boxes = _mesh_boxes(p.space.mesh.breakpoints)
            pts, wts = tensor_rules(boxes, [npts] * p.ndim)
            _, det, _ = p.geometry.jacobian(pts.reshape(-1, p.ndim), p.id)
            total += float(np.dot(wts.ravel(), det))
        return total


def facet_normal(geometry: GeometryMap, face, xi) -> np.ndarray:
    """Outward unit normal ``(n_x, n_t)`` of a patch face at parametric point(s)."""
    axis, side = face
    xi = np.asarray(xi, dtype=float)
    pts = np.atleast_2d(xi).copy()
    pts[:, axis] = side
    _, n = geometry.surface_measure(pts, axis, side)
    return n[0] if xi.ndim == 1 else n


def _faces(D):
    return [(a, s) for a in range(D) for s in (0, 1)]


def _face_grid(D, face, n):
    """Parametric sample points on a face, including its corners when n >= 2."""
    axis, side = face
    t = np.linspace(0.0, 1.0, n)
    axes = [t if a != axis else np.array([float(side)]) for a in range(D)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel(order="F") for g in grid], axis=-1)


def _corner_params(D, face):
    return _face_grid(D, face, 2)


def _project_to_face(geom, face, target, guess, iters=8):
    """Gauss-Newton projection of a physical point onto a parametric face."""
    axis, side = face
    tang = [a for a in range(geom.ndim) if a != axis]
    xi = np.array(guess, dtype=float)
    for _ in range(iters):
        X, J, _ = geom.derivatives(xi[None], 1)
        r = X[0] - target
        Jt = J[0][:, tang]
        step, *_ = np.linalg.lstsq(Jt, -r, rcond=None)
        xi[tang] = np.clip(xi[tang] + step, 0.0, 1.0)
    return float(np.linalg.norm(geom.map_points(xi[None])[0] - target))


def _affine_correspondence(D, face_i, face_j, corner_match):
    """Affine map sending owner-face corners onto the matched neighbor corners."""
    ci = _corner_params(D, face_i)
    cj = _corner_params(D, face_j)
    axis = face_i[0]
    base = cj[corner_match[0]]
    A = np.zeros((D, D))
    for a in range(D):
        if a == axis:
            continue
        target = ci[0].copy()
        target[a] = 1.0
        k = int(np.flatnonzero(np.all(ci == target, axis=1))[0])
        A[:, a] = cj[corner_match[k]] - base
    c = base - A @ ci[0]
    mapped = ci @ A.T + c
    if not np.allclose(mapped, cj[corner_match], atol=1e-14):
        raise UnsupportedConfigurationError(
            f"face corners of {face_i} and {face_j} are not related by an affine map"
        )
    return A, c


def build_multipatch(patches, matching_tol: float = 1e-9, samples: int = 5) -> MultiPatchDomain:
    """Classify every patch face and assemble the multi-patch domain.

    Coinciding faces of different patches become interior facets, owned by
    the patch with the smaller id.  Remaining boundary faces at the smallest
    time are initial facets, those at the largest time with normal
    ``(0, ..., 0, 1)`` are terminal facets, and the rest are lateral
    Dirichlet facets.
    """
    patches = tuple(sorted(patches, key=lambda p: p.id))
    if [p.id for p in patches] != list(range(len(patches))):
        raise ValueError("patch ids must be 0, 1, ..., N-1")
    D = patches[0].ndim
    if any(p.ndim != D for p in patches):
        raise ValueError("all patches must have the same dimension")

    allcp = np.vstack([p.geometry.control_points for p in patches])
    scale = float(np.linalg.norm(allcp.max(axis=0) - allcp.min(axis=0)))
    tol = matching_tol * max(scale, 1.0)

    faces = [(p.id, f) for p in patches for f in _faces(D)]
    corners = {
        (pid, f): patches[pid].geometry.map_points(_corner_params(D, f)) for pid, f in faces
    }
    samples_phys = {}
    sample_params = {}
    for pid, f in faces:
        sp = _face_grid(D, f, samples)
        sample_params[(pid, f)] = sp
        samples_phys[(pid, f)] = patches[pid].geometry.map_points(sp)

    facets = []
    matched = set()
    for a, (pi, fi) in enumerate(faces):
        for pj, fj in faces[a + 1:]:
            if pj == pi or (pj, fj) in matched or (pi, fi) in matched:
                continue
            ca, cb = corners[(pi, fi)], corners[(pj, fj)]
            dist = np.linalg.norm(ca[:, None, :] - cb[None, :, :], axis=-1)
            close = dist <= tol
            if not np.all(close.any(axis=1)):
                continue
            match = np.argmax(close, axis=1)
            if len(set(match.tolist())) != len(match):
                raise UnsupportedConfigurationError(
                    f"collapsed face corners between patch {pi} face {fi} and patch {pj} face {fj}"
                )
            A, c = _affine_correspondence(D, fi, fj, match)
            own = sample_params[(pi, fi)]
            other = np.clip(own @ A.T + c, 0.0, 1.0)
            gap = np.linalg.norm(
                patches[pi].geometry.map_points(own) - patches[pj].geometry.map_points(other), axis=1
            )
            if gap.max() > tol:
                raise UnsupportedConfigurationError(
                    f"patch {pi} face {fi} and patch {pj} face {fj} share corners but are not "
                    f"affinely matched (max gap {gap.max():.2e})"
                )
            facets.append(Facet(FacetKind.INTERIOR, pi, fi, pj, fj, A, c))
            matched.update({(pi, fi), (pj, fj)})

    boundary = [key for key in faces if key not in matched]
    _reject_partial_overlaps(patches, boundary, samples_phys, tol)

    t_all = np.concatenate([samples_phys[k][:, -1] for k in faces])
    t_min, t_max = float(t_all.min()), float(t_all.max())
    for pid, f in boundary:
        geom = patches[pid].geometry
        t = samples_phys[(pid, f)][:, -1]
        _, normals = geom.surface_measure(sample_params[(pid, f)], f[0], f[1], pid)
        if np.all(np.abs(t - t_min) <= tol):
            if not np.all(normals[:, -1] < -1.0 + 1e-8):
                raise TopologyError(f"patch {pid} face {f} lies on t = {t_min} but its normal is not -e_t")
            kind = FacetKind.INITIAL
        elif np.all(np.abs(t - t_max) <= tol):
            if not (np.all(np.abs(normals[:, :-1]) <= 1e-8) and np.all(normals[:, -1] > 0)):
                raise TopologyError(f"patch {pid} face {f} lies on t = {t_max} but its normal is not +e_t")
            kind = FacetKind.TERMINAL
        else:
            kind = FacetKind.DIRICHLET
        facets.append(Facet(kind, pid, f))

    facets.sort(key=lambda fc: (fc.owner, fc.face))
    return MultiPatchDomain(patches, tuple(facets))


def _reject_partial_overlaps(patches, boundary, samples_phys, tol):
    """Boundary faces whose interior touches another patch's face overlap partially."""
    D = patches[0].ndim
    for pi, fi in boundary:
        mid = _face_grid(D, fi, 3)
        center = mid[len(mid) // 2]
        target = patches[pi].geometry.map_points(center[None])[0]
        for pj, fj in boundary:
            if pj == pi:
                continue
            pts = samples_phys[(pj, fj)]
            k = int(np.argmin(np.linalg.norm(pts - target, axis=1)))
            guess = _face_grid(D, fj, int(round(len(pts) ** (1.0 / max(D - 1, 1)))))[k]
            if _project_to_face(patches[pj].geometry, fj, target, guess) <= max(tol, 1e-7):
                raise UnsupportedConfigurationError(
                    f"patch {pi} face {fi} partially overlaps patch {pj} face {fj}"
                )


def load_geometry(path) -> list:
    """Read geometry maps from the JSON schema ``{"patches": [...]}``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "patches" not in data or not data["patches"]:
        raise ValueError("geometry file must contain a non-empty 'patches' list")
    return [GeometryMap.from_dict(p) for p in data["patches"]]


def dump_geometry(geometries, path) -> None:
    payload = {"patches": [g.to_dict() for g in geometries]}
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")


def domain_from_geometries(geometries, matching_tol: float = 1e-9) -> MultiPatchDomain:
    patches = [make_patch(i, g) for i, g in enumerate(geometries)]
    return build_multipatch(patches, matching_tol)
