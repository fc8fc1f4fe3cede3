import numpy as np
import pytest
import scipy.sparse as sp

from stdgiga.assembly import DGParameters, assemble_system
from stdgiga.cases import case_moving_2d
from stdgiga.exceptions import SolverError
from stdgiga.solve import relative_residual, solve


def test_identity():
    b = np.arange(1.0, 6.0)
    rep = solve((sp.identity(5, format="csr"), b))
    np.testing.assert_array_equal(rep.solution, b)
    assert rep.relative_residual == 0.0


def test_two_by_two():
    rep = solve((sp.csr_matrix([[2.0, 1.0], [1.0, 3.0]]), np.array([3.0, 4.0])))
    np.testing.assert_allclose(rep.solution, [1.0, 1.0], atol=1e-15)
    assert rep.permc_spec == "COLAMD"


def test_zero_rhs_residual():
    rep = solve((sp.identity(3, format="csr") * 2.0, np.zeros(3)))
    assert rep.relative_residual == 0.0


def test_singular_matrix():
    with pytest.raises(SolverError):
        solve((sp.csr_matrix([[1.0, 0.0], [0.0, 0.0]]), np.ones(2)))
    with pytest.raises(SolverError):
        solve((sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]]), np.ones(2)))


def test_shape_errors():
    with pytest.raises(SolverError):
        solve((sp.csr_matrix(np.ones((2, 3))), np.ones(2)))
    with pytest.raises(SolverError):
        solve((sp.identity(3), np.ones(2)))


def test_benchmark_residual_and_determinism():
    domain, problem = case_moving_2d()
    domain = domain.discretize(2, 3)
    system = assemble_system(domain, problem, DGParameters.default(2, 1))
    rep = solve(system)
    assert rep.relative_residual <= 1e-10
    # independent recomputation from the coo triplets
    coo = system.matrix.tocoo()
    Ax = np.zeros(system.size)
    np.add.at(Ax, coo.row, coo.data * rep.solution[coo.col])
    indep = np.linalg.norm(system.rhs - Ax) / np.linalg.norm(system.rhs)
    assert abs(indep - rep.relative_residual) <= 1e-14
    assert relative_residual(system.matrix, rep.solution, system.rhs) == rep.relative_residual
    again = solve(assemble_system(domain, problem, DGParameters.default(2, 1)))
    assert np.array_equal(again.solution, rep.solution)
    assert rep.fill_ratio >= 1.0
