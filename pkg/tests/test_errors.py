import dataclasses

import numpy as np
import pytest
from scipy.integrate import dblquad

from stdgiga.assembly import DGParameters, apply_constraints
from stdgiga.cases import ManufacturedProblem, case_moving_2d, case_unit_box, moving_bounds
from stdgiga.errors import ErrorReport, convergence_rates, dg_error, dg_norm, l2_error, l2_norm
from stdgiga.geometry import MultiPatchDomain


def _time_field(d):
    # v = t
    exact = lambda p: np.atleast_2d(p)[:, -1].copy()
    gx = lambda p: np.zeros((np.atleast_2d(p).shape[0], d))
    one = lambda p: np.ones(np.atleast_2d(p).shape[0])
    return ManufacturedProblem("t", exact, gx, one, one, exact, exact)


def test_norm_of_t_on_unit_box():
    domain, _ = case_unit_box()
    dom = domain.discretize(1, 0)
    patch = dataclasses.replace(dom.patches[0], h=0.5)
    dom = MultiPatchDomain((patch,), dom.facets)
    val = dg_error(None, _time_field(1), dom, DGParameters(theta=0.1))
    assert val == pytest.approx(np.sqrt(0.55), abs=1e-14)


def test_zero_and_homogeneity():
    domain, problem = case_moving_2d()
    dom = domain.discretize(2, 2)
    params = DGParameters.default(2, 1)
    assert dg_norm(np.zeros(dom.num_dofs), dom, params) == 0.0
    rng = np.random.default_rng(0)
    v, w = rng.standard_normal((2, dom.num_dofs))
    nv = dg_norm(v, dom, params)
    assert dg_norm(2 * v, dom, params) == pytest.approx(2 * nv, rel=1e-12)
    assert dg_norm(v + w, dom, params) <= nv + dg_norm(w, dom, params) + 1e-10
    assert l2_norm(-3 * v, dom, params) == pytest.approx(3 * l2_norm(v, dom, params), rel=1e-12)


def test_norm_definite_on_constrained_space():
    domain, problem = case_moving_2d()
    dom = domain.discretize(1, 1)
    params = DGParameters.default(1, 1)
    cidx, _ = apply_constraints(dom, problem)
    free = np.setdiff1d(np.arange(dom.num_dofs), cidx)
    for k in free:
        v = np.zeros(dom.num_dofs)
        v[k] = 1.0
        assert dg_norm(v, dom, params) > 1e-8


def test_exact_against_zero():
    domain, problem = case_moving_2d()
    dom = domain.discretize(2, 1)
    params = DGParameters.default(2, 1)
    assert dg_error(np.zeros(dom.num_dofs), problem, dom, params) == pytest.approx(
        dg_error(None, problem, dom, params), rel=1e-14
    )


def test_l2_of_exact_against_adaptive_quadrature():
    domain, problem = case_moving_2d()
    dom = domain.discretize(2, 3)
    integrand = lambda x, t: problem.exact(np.array([[x, t]]))[0] ** 2
    ref, _ = dblquad(integrand, 0, 2, lambda t: moving_bounds(t)[0], lambda t: moving_bounds(t)[1],
                     epsabs=1e-14, epsrel=1e-14)
    assert l2_error(None, problem, dom, DGParameters.default(2, 1)) == pytest.approx(np.sqrt(ref), rel=1e-10)


def test_l2_exact_on_unit_box():
    domain, problem = case_unit_box()
    dom = domain.discretize(1, 0)
    # int_0^1 int_0^1 (x t)^2 = 1/9
    assert l2_error(None, problem, dom) == pytest.approx(1 / 3, abs=1e-14)


def test_rates():
    assert convergence_rates([0.4, 0.1]) == [2.0]
    assert convergence_rates([0.7, 0.7]) == [0.0]
    np.testing.assert_allclose(convergence_rates([0.9, 0.3, 0.1]), [np.log2(3)] * 2)
    with pytest.raises(ValueError):
        convergence_rates([0.1, 0.0])
    with pytest.raises(ValueError):
        convergence_rates([-1.0, 0.5])


def test_error_report_validation():
    ErrorReport(1, 10, 0.5, 0.1, 0.01)
    with pytest.raises(ValueError):
        ErrorReport(1, 10, 0.5, -0.1, 0.01)
