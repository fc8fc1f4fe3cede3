import numpy as np
import pytest

from stdgiga.cases import (
    case_moving_2d,
    case_moving_3d,
    case_unit_box,
    get_case,
    moving_bounds,
    sine_problem,
)


def _fd_residual(problem, pts, h=1e-4):
    # u_t - Laplace_x u via central differences
    d = pts.shape[1] - 1
    e_t = np.zeros(d + 1)
    e_t[-1] = h
    ut = (problem.exact(pts + e_t) - problem.exact(pts - e_t)) / (2 * h)
    lap = np.zeros(len(pts))
    for k in range(d):
        e = np.zeros(d + 1)
        e[k] = h
        lap += (problem.exact(pts + e) - 2 * problem.exact(pts) + problem.exact(pts - e)) / h ** 2
    return ut - lap


@pytest.mark.parametrize("factory", [case_unit_box, case_moving_2d, case_moving_3d])
def test_source_consistency(factory):
    domain, problem = factory()
    rng = np.random.default_rng(0)
    pts = []
    for patch in domain.patches:
        pts.append(patch.geometry.map_points(rng.uniform(0, 1, (500, patch.ndim))))
    pts = np.concatenate(pts)
    f = problem.source(pts)
    fd = _fd_residual(problem, pts)
    scale = max(1.0, np.max(np.abs(f)))
    assert np.max(np.abs(f - fd)) / scale <= 1e-5
    # analytic derivatives against differences
    h = 1e-6
    g = problem.grad(pts)
    for k in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[k] = h
        fdk = (problem.exact(pts + e) - problem.exact(pts - e)) / (2 * h)
        np.testing.assert_allclose(g[:, k], fdk, atol=1e-7)


def test_sine_source_value():
    f = sine_problem(1).source(np.array([[0.5, 0.5]]))
    assert abs(f[0] - np.pi ** 2) < 1e-12


def test_bilinear_source():
    _, problem = case_unit_box()
    pts = np.array([[0.3, 0.9], [0.7, 0.1]])
    np.testing.assert_allclose(problem.source(pts), [0.3, 0.7])


def test_moving_bounds_follow_control_nets():
    domain, _ = case_moving_2d()
    for pid, (t0, t1) in enumerate([(0.0, 1.0), (1.0, 2.0)]):
        g = domain.patches[pid].geometry
        tau = np.linspace(0, 1, 100)
        left = g.map_points(np.stack([np.zeros_like(tau), tau], axis=1))
        right = g.map_points(np.stack([np.ones_like(tau), tau], axis=1))
        t = t0 + tau * (t1 - t0)
        np.testing.assert_allclose(left[:, 1], t, atol=1e-14)
        a, b = moving_bounds(t)
        np.testing.assert_allclose(left[:, 0], a, atol=1e-14)
        np.testing.assert_allclose(right[:, 0], b, atol=1e-14)
    a, b = moving_bounds(np.array([0.0, 1.0, 2.0]))
    np.testing.assert_allclose(b - a, 1.0)


def test_control_points():
    domain, _ = case_moving_2d()
    np.testing.assert_array_equal(domain.patches[0].geometry.control_points[0], [0, 0])
    domain3, _ = case_moving_3d()
    lower, upper = (p.geometry.control_points for p in domain3.patches)
    assert lower.shape == upper.shape == (12, 3)
    # multi-index (i1, i2, i3), one-based, first index fastest
    flat = lambda i1, i2, i3: (i1 - 1) + 2 * (i2 - 1) + 4 * (i3 - 1)
    np.testing.assert_array_equal(upper[flat(1, 1, 2)], [0.25, 0, 1.5])
    np.testing.assert_array_equal(lower[flat(2, 1, 2)], [1.25, 0, 0.5])
    assert domain3.patches[0].geometry.basis.degrees == (1, 1, 2)


def test_3d_interface_area():
    from stdgiga.quadrature import facet_rule

    domain, _ = case_moving_3d()
    r = facet_rule(domain.patches[0].geometry, 2, 1, [(0, 1)] * 3, (3, 3, 3))
    assert abs(r.weights.sum() - 1.0) < 1e-13


def test_unknown_case():
    with pytest.raises(KeyError):
        get_case("nope")
    with pytest.raises(ValueError):
        case_unit_box(3)
