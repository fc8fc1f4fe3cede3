"""Discrete dG norm, error measures and convergence rates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import DGParameters, facet_batches, volume_batches
from .geometry import FacetKind, MultiPatchDomain, physical_derivs

__all__ = [
    "DiscreteField",
    "ExactField",
    "DifferenceField",
    "dg_norm",
    "dg_error",
    "l2_error",
    "l2_norm",
    "convergence_rates",
    "ErrorReport",
]


class DiscreteField:
    """Spline field given by the global coefficient vector of ``domain``."""

    def __init__(self, domain: MultiPatchDomain, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (domain.num_dofs,):
            raise ValueError(f"expected {domain.num_dofs} coefficients, got {coeffs.shape}")
        self.domain = domain
        self.coeffs = coeffs

    def evaluate(self, patch, pts):
        tab = physical_derivs(patch.geometry, patch.space, pts, second=False, patch_id=patch.id)
        c = self.coeffs[self.domain.offsets[patch.id] + tab.indices]
        return np.einsum("ml,ml->m", c, tab.values), np.einsum("ml,mlk->mk", c, tab.grad)


class ExactField:
    """Analytic field from a ``ManufacturedProblem``."""

    def __init__(self, problem):
        self.problem = problem

    def evaluate(self, patch, pts):
        X = patch.geometry.map_points(pts)
        return self.problem.exact(X), self.problem.grad(X)


class DifferenceField:
    def __init__(self, a, b):
        self.a, self.b = a, b

    def evaluate(self, patch, pts):
        va, ga = self.a.evaluate(patch, pts)
        vb, gb = self.b.evaluate(patch, pts)
        return va - vb, ga - gb


def _as_field(v, domain):
    if hasattr(v, "evaluate"):
        return v
    return DiscreteField(domain, v)


def dg_norm(v, domain: MultiPatchDomain, params: DGParameters, extra_points: int = 0, squared: bool = False) -> float:
    """Space-time dG norm of a field (coefficient vector or field object).

    Sum of per-patch ``||grad_x v||^2 + th ||v_t||^2``, terminal
    ``||v||^2 / 2 + th ||grad_x v||^2 / 2`` and, on interior facets,
    ``||[v]_t||^2 / 2 + th ||[grad_x v]_t||^2 / 2 + delta1/h ||[v]_x||^2
    + delta2 th ||[v_t]_x||^2``, with ``th = theta h`` of the facet owner.
    """
    field = _as_field(v, domain)
    total = 0.0
    for patch in domain.patches:
        th = params.theta * patch.h
        for b, w in volume_batches(patch, params.orders_for(patch, extra_points), second=False):
            val, grad = field.evaluate(patch, b.param_points)
            grad = grad.reshape(b.E, b.nq, -1)
            total += float(np.sum(w * (np.sum(grad[..., :-1] ** 2, axis=-1) + th * grad[..., -1] ** 2)))

    for facet in domain.facets:
        if facet.kind not in (FacetKind.TERMINAL, FacetKind.INTERIOR):
            continue
        owner = domain.patches[facet.owner]
        th = params.theta * owner.h
        orders = params.orders_for(owner, extra_points)
        for bo, bn, w, normals in facet_batches(domain, facet, orders, second=False):
            vo, go = field.evaluate(owner, bo.param_points)
            vo, go = vo.reshape(bo.E, bo.nq), go.reshape(bo.E, bo.nq, -1)
            if facet.kind is FacetKind.TERMINAL:
                total += float(np.sum(w * (0.5 * vo ** 2 + 0.5 * th * np.sum(go[..., :-1] ** 2, axis=-1))))
                continue
            other = domain.patches[facet.neighbor]
            vn, gn = field.evaluate(other, bn.param_points)
            vn, gn = vn.reshape(bn.E, bn.nq), gn.reshape(bn.E, bn.nq, -1)
            nt = normals[..., -1]
            nx = normals[..., :-1]
            dv = vo - vn
            jt = nt * dv
            jgt = nt[..., None] * (go[..., :-1] - gn[..., :-1])
            jx = nx * dv[..., None]
            jdt = nx * (go[..., -1] - gn[..., -1])[..., None]
            dens = (
                0.5 * jt ** 2
                + 0.5 * th * np.sum(jgt ** 2, axis=-1)
                + params.delta1 / owner.h * np.sum(jx ** 2, axis=-1)
                + params.delta2 * th * np.sum(jdt ** 2, axis=-1)
            )
            total += float(np.sum(w * dens))
    return total if squared else float(np.sqrt(total))


def dg_error(coeffs, problem, domain: MultiPatchDomain, params: DGParameters, extra_points: int = 1) -> float:
    """``||u - u_h||_h`` for discrete coefficients ``coeffs`` (``None`` means ``u_h = 0``)."""
    exact = ExactField(problem)
    if coeffs is None:
        return dg_norm(exact, domain, params, extra_points)
    return dg_norm(DifferenceField(exact, DiscreteField(domain, coeffs)), domain, params, extra_points)


def l2_norm(v, domain: MultiPatchDomain, params: DGParameters | None = None, extra_points: int = 1) -> float:
    field = _as_field(v, domain)
    params = params or DGParameters()
    total = 0.0
    for patch in domain.patches:
        for b, w in volume_batches(patch, params.orders_for(patch, extra_points), second=False):
            val, _ = field.evaluate(patch, b.param_points)
            total += float(np.sum(w * val.reshape(b.E, b.nq) ** 2))
    return float(np.sqrt(total))


def l2_error(coeffs, problem, domain: MultiPatchDomain, params: DGParameters | None = None, extra_points: int = 1) -> float:
    """``||u - u_h||`` in L2 over the whole space-time domain."""
    exact = ExactField(problem)
    if coeffs is None:
        return l2_norm(exact, domain, params, extra_points)
    return l2_norm(DifferenceField(exact, DiscreteField(domain, coeffs)), domain, params, extra_points)


def convergence_rates(errors) -> list:
    """Rates ``log2(e_i / e_{i+1})`` between successive refinement levels."""
    e = np.asarray(errors, dtype=float)
    if np.any(~(e > 0)):
        raise ValueError("errors must be positive to compute rates")
    return [float(r) for r in np.log2(e[:-1] / e[1:])]


@dataclass(frozen=True)
class ErrorReport:
    level: int
    dofs: int
    h: float
    err_dg: float
    err_l2: float

    def __post_init__(self):
        if self.err_dg < 0 or self.err_l2 < 0:
            raise ValueError("errors must be non-negative")
